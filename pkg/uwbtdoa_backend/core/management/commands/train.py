import pandas as pd

from core.model.checkpoint import save_checkpoint
from core.model.entrenamiento import train
from core.management.base import ExperimentCommand
from core.utils.config import model_config_from, output_path, train_config_from


class Command(ExperimentCommand):
    help = "Entrena el transformer corrector y lo evalúa sobre el dataset de evaluación."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--dataset', help='Dataset de entrenamiento (por defecto simulation.train_path).')
        parser.add_argument('--eval-dataset', help='Dataset de evaluación (por defecto simulation.eval_path).')

    def run(self, config, /, **options):
        sim = config['simulation']
        env = self.environment(config)
        model_cfg = model_config_from(config['model'])
        train_cfg = train_config_from(config['train'], config['seed'])

        train_set, _ = self.encoded(config, self.samples(config, options['dataset'] or sim['train_path']),
                                    env, model_cfg)
        model = train(train_set, model_cfg, train_cfg, env, progress=self.progress)
        ruta = save_checkpoint(model, output_path(config, config['train']['checkpoint']))
        pd.DataFrame(model.training_history).to_csv(output_path(config, 'history.csv'), index=False)
        self.stdout.write(f"Checkpoint -> {ruta} ({len(model.training_history)} épocas)")

        ruta_eval = output_path(config, options['eval_dataset'] or sim['eval_path'])
        if not ruta_eval.exists():
            return
        eval_set, baseline = self.encoded(config, self.samples(config, ruta_eval), env, model_cfg)
        metricas, _ = self.metrics(model, eval_set, baseline)
        self.write_json(config, 'metrics.json', metricas)
        self.stdout.write(f"MAE {metricas['mae']:.3f} m (baseline {metricas['baseline']['mae']:.3f} m)")
