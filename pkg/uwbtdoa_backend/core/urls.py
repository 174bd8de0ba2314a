from rest_framework import routers
from django.urls import path, include
from .views import barridoViewSet, resultadoBarridoViewSet, complejidad, complejidad_cnn

router = routers.DefaultRouter()
router.register(r'barridos', barridoViewSet, basename='barrido')
router.register(r'resultados', resultadoBarridoViewSet, basename='resultado')

urlpatterns = [
    path('', include(router.urls)),
    path('complejidad/', complejidad, name='complejidad'),
    path('complejidad/cnn/', complejidad_cnn, name='complejidad-cnn'),
]
