from core.analysis.barrido import enumerate_grid, run_sweep, write_tables
from core.management.base import ExperimentCommand
from core.positioning.baseline import run_baseline
from core.utils.config import model_config_from, output_path, train_config_from


class Command(ExperimentCommand):
    help = "Barrido de hiperparámetros reanudable; escribe resultados, frente de Pareto y resúmenes en CSV."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--name', help='Nombre del barrido (por defecto sweep.name).')
        parser.add_argument('--dry-run', action='store_true', help='Solo lista las combinaciones de la grilla.')

    def run(self, config, /, **options):
        sweep_cfg = config['sweep']
        nombre = options['name'] or sweep_cfg['name']
        entradas = enumerate_grid(sweep_cfg['blocks'])
        if options['dry_run']:
            for entrada in entradas:
                self.stdout.write(entrada['clave'])
            self.stdout.write(f"{len(entradas)} configuraciones")
            return

        sim = config['simulation']
        env = self.environment(config)
        train_samples = self.samples(config, sim['train_path'])
        if sweep_cfg['max_train_samples']:
            train_samples = train_samples[:sweep_cfg['max_train_samples']]
        eval_samples = self.samples(config, sim['eval_path'])
        baseline_train = run_baseline(train_samples, env, sim['pair_policy'], sim['fixed_z'], self.progress)
        baseline_eval = run_baseline(eval_samples, env, sim['pair_policy'], sim['fixed_z'], self.progress)

        registro = run_sweep(
            nombre, sweep_cfg['blocks'],
            base=model_config_from(config['model']),
            train_cfg=train_config_from(config['train'], config['seed'], sweep_cfg['epochs']),
            env=env,
            train_samples=train_samples,
            eval_samples=eval_samples,
            baseline_train=baseline_train.estimates,
            baseline_eval=baseline_eval.estimates,
            n_av=sweep_cfg['n_av'],
            config=config,
            progress=self.progress,
        )
        rutas = write_tables(registro, output_path(config, '.'))
        self.stdout.write(f"Barrido {registro.name}: {registro.estado} "
                          f"({registro.resultados.filter(estado='ok').count()}/{len(entradas)} ok)")
        for ruta in rutas.values():
            self.stdout.write(f"  {ruta}")
