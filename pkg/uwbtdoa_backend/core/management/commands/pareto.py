import pandas as pd
from django.core.management.base import CommandError

from core.analysis.barrido import pareto_frame, results_frame
from core.management.base import ExperimentCommand
from core.models import barrido
from core.utils.config import output_path


class Command(ExperimentCommand):
    help = "Frente de Pareto (operaciones vs MAE) de un barrido guardado o de un CSV de resultados."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        fuente = parser.add_mutually_exclusive_group()
        fuente.add_argument('--barrido', help='Nombre del barrido en la base de datos (por defecto sweep.name).')
        fuente.add_argument('--results', help='CSV de resultados con columnas total_ops, mae y estado.')

    def run(self, config, /, **options):
        if options['results']:
            resultados = pd.read_csv(output_path(config, options['results']))
            if 'estado' not in resultados.columns:
                resultados['estado'] = 'ok'
            nombre = output_path(config, options['results']).stem
        else:
            nombre = options['barrido'] or config['sweep']['name']
            try:
                registro = barrido.objects.get(name=nombre)
            except barrido.DoesNotExist:
                raise CommandError(f"No existe el barrido {nombre!r}.")
            resultados = results_frame(registro)

        faltan = {'total_ops', 'mae'} - set(resultados.columns)
        if faltan:
            raise CommandError(f"Faltan columnas {sorted(faltan)} en los resultados.")
        frente = pareto_frame(resultados)
        ruta = output_path(config, f'{nombre}_pareto.csv')
        ruta.parent.mkdir(parents=True, exist_ok=True)
        frente.to_csv(ruta, index=False)
        self.stdout.write(f"{len(frente)} configuraciones en el frente de Pareto -> {ruta}")
