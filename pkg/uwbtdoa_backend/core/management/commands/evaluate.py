import pandas as pd

from core.model.checkpoint import load_checkpoint
from core.model.transformer import build_model
from core.management.base import ExperimentCommand
from core.utils.config import model_config_from, output_path


class Command(ExperimentCommand):
    help = "Evalúa un checkpoint (o un modelo sin entrenar) y escribe métricas y predicciones."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--checkpoint', help='Checkpoint safetensors (por defecto train.checkpoint).')
        parser.add_argument('--dataset', help='Dataset de evaluación (por defecto simulation.eval_path).')
        parser.add_argument('--untrained', action='store_true',
                            help='Usa un modelo recién inicializado desde la configuración.')

    def run(self, config, /, **options):
        env = self.environment(config)
        if options['untrained']:
            model = build_model(model_config_from(config['model']), env, seed=config['seed'])
            model.eval()
        else:
            model = load_checkpoint(output_path(config, options['checkpoint'] or config['train']['checkpoint']))

        samples = self.samples(config, options['dataset'] or config['simulation']['eval_path'])
        eval_set, baseline = self.encoded(config, samples, env, model.config)
        metricas, predicciones = self.metrics(model, eval_set, baseline)
        self.write_json(config, 'metrics.json', metricas)

        filas = [{'sample_id': s.sample_id,
                  'x': p[0], 'y': p[1], 'z': p[2],
                  'x_tdoa': s.p_tdoa[0], 'y_tdoa': s.p_tdoa[1], 'z_tdoa': s.p_tdoa[2],
                  'x_true': s.target[0], 'y_true': s.target[1], 'z_true': s.target[2]}
                 for s, p in zip(eval_set, predicciones)]
        pd.DataFrame(filas).to_csv(output_path(config, 'predictions.csv'), index=False)
        self.stdout.write(f"MAE {metricas['mae']:.3f} m (baseline {metricas['baseline']['mae']:.3f} m, "
                          f"mejora {metricas['improvement_percent']:.1f}%)")
