"""Base común de los comandos: opciones de configuración, rutas de salida y manejo de errores."""
import json
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from core.channel.simulador import Environment
from core.data.dataset_io import read_dataset, read_environment, region_filter, write_environment
from core.exceptions import UwbTdoaError
from core.model.entrenamiento import evaluate
from core.model.transformer import encode_dataset
from core.positioning.baseline import run_baseline
from core.positioning.metricas import improvement_percent, metrics_report
from core.utils.config import environment_from, load_config, output_path

logger = logging.getLogger(__name__)

ENVIRONMENT_FILE = 'environment.yaml'


class ExperimentCommand(BaseCommand):
    """Subclases implementan run(config, **options)."""

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Archivo YAML del experimento.')
        parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='SECCION.CAMPO=VALOR',
                            help='Sobrescribe un campo de la configuración (repetible).')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--output-dir')
        parser.add_argument('--no-progress', action='store_true')
        parser.add_argument('--exclude-x', type=float, nargs=2, metavar=('X_MIN', 'X_MAX'),
                            help='Excluye las muestras con x verdadero en [X_MIN, X_MAX].')
        parser.add_argument('--dataset-format', default='jsonl',
                            help='Adaptador de lectura de datasets (ver core.data.dataset_io.ADAPTERS).')

    def handle(self, *args, **options):
        try:
            if options.get('exclude_x'):
                options['overrides'] = [*options['overrides'], f"simulation.exclude_x={list(options['exclude_x'])}"]
            config = load_config(options['config'], options['overrides'], options['seed'], options['output_dir'])
            self.progress = settings.UWB_TDOA.get('PROGRESS_BARS', True) and not options['no_progress']
            self.dataset_format = options.get('dataset_format') or 'jsonl'
            return self.run(config, **options)
        except serializers.ValidationError as e:
            raise CommandError(f"Configuración inválida: {e.detail}")
        except UwbTdoaError as e:
            raise CommandError(str(e))
        except OSError as e:
            raise CommandError(f"Error de E/S: {e}")

    def run(self, config: dict, /, **options):
        raise NotImplementedError

    def environment(self, config: dict) -> Environment:
        """Entorno del config; si no se especifica, el que dejó `simulate` en output_dir."""
        env_cfg = config['environment']
        guardado = output_path(config, ENVIRONMENT_FILE)
        if not env_cfg.get('path') and not env_cfg.get('anchors') and guardado.exists():
            return read_environment(guardado)
        return environment_from(env_cfg)

    def save_environment(self, config: dict, env: Environment) -> Path:
        return write_environment(env, output_path(config, ENVIRONMENT_FILE))

    def samples(self, config: dict, ruta, apply_region_filter: bool = True):
        samples = read_dataset(output_path(config, ruta), self.dataset_format)
        if apply_region_filter and config['simulation'].get('exclude_x'):
            antes = len(samples)
            samples = region_filter(samples, config['simulation']['exclude_x'])
            logger.info("Filtro de región x=%s: %d -> %d muestras", config['simulation']['exclude_x'],
                        antes, len(samples))
        return samples

    def write_json(self, config: dict, nombre: str, data) -> Path:
        ruta = output_path(config, nombre)
        ruta.parent.mkdir(parents=True, exist_ok=True)
        with ruta.open('w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, ensure_ascii=False)
        return ruta

    def encoded(self, config: dict, samples, env: Environment, model_cfg):
        """Baseline TDoA + codificación; devuelve (codificadas, BaselineResult)."""
        sim = config['simulation']
        baseline = run_baseline(samples, env, sim['pair_policy'], sim['fixed_z'], progress=self.progress)
        codificadas, _ = encode_dataset(samples, env, model_cfg, baseline.estimates)
        return codificadas, baseline

    def metrics(self, model, eval_set, baseline) -> tuple:
        """Métricas del modelo frente al baseline TDoA sobre las mismas muestras."""
        report, predicciones = evaluate(model, eval_set)
        base = metrics_report([s.p_tdoa for s in eval_set], [s.target for s in eval_set])
        metricas = {**report.to_dict(), 'baseline': base.to_dict(),
                    'improvement_percent': improvement_percent(base.mae, report.mae),
                    'n_unsolvable': len(baseline.unsolvable)}
        return metricas, predicciones
