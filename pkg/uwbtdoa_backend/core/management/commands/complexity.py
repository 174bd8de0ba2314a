from core.analysis.complejidad import cnn_baseline_ops, complexity_curve, op_count
from core.management.base import ExperimentCommand
from core.utils.config import model_config_from, output_path

DEFAULT_N_AV = 6.2
DEFAULT_L_PATCHES = [1, 3, 5, 6, 10, 15, 25, 30, 50, 75, 150]


class Command(ExperimentCommand):
    help = "Cuenta operaciones del modelo configurado y genera la curva de complejidad por L_patch."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--l-patches', type=int, nargs='+', default=DEFAULT_L_PATCHES)
        parser.add_argument('--n-total', type=int, help='Anclas totales (por defecto las del entorno).')
        parser.add_argument('--n-av', type=float, help='Anclas disponibles promedio (por defecto sweep.n_av o 6.2).')
        parser.add_argument('--pairs', type=int, help='Pares TDoA de la CNN de referencia (por defecto n_total).')

    def run(self, config, /, **options):
        n_total = options['n_total'] or self.environment(config).n_total
        n_av = options['n_av'] or config['sweep']['n_av'] or min(DEFAULT_N_AV, n_total)
        cfg = model_config_from(config['model'])

        cuenta = op_count(cfg, n_total, n_av)
        self.write_json(config, 'complexity.json', {
            **cuenta.to_dict(), 'n_total': n_total, 'n_av': n_av,
            'cnn_ops': cnn_baseline_ops(options['pairs'] if options['pairs'] is not None else n_total),
        })
        curva = complexity_curve(cfg, options['l_patches'], n_total, n_av, options['pairs'])
        ruta = output_path(config, 'complexity_curve.csv')
        ruta.parent.mkdir(parents=True, exist_ok=True)
        curva.to_csv(ruta, index=False)
        self.stdout.write(f"Operaciones totales: {cuenta.total_ops} ({cuenta.n_tokens} tokens)")
        self.stdout.write(f"Curva -> {ruta}")
