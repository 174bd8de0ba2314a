from hypothesis import settings

# los modelos en float64 son lentos para el deadline por defecto de hypothesis
settings.register_profile('uwbtdoa', deadline=None, max_examples=40)
settings.load_profile('uwbtdoa')
