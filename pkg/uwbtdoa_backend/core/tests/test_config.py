import tempfile
from pathlib import Path

from django.conf import settings
from django.test import SimpleTestCase, override_settings
from rest_framework import serializers

from core.analysis.barrido import enumerate_grid
from core.exceptions import INCOMPATIBLE_ENCODING_MSG, InvalidConfigError
from core.model.encodings import EncodingKind
from core.model.patching import PatchStrategy
from core.utils.config import (apply_overrides, environment_from, load_config, model_config_from, output_path,
                               parse_override, train_config_from)

SIN_ARCHIVO = {**settings.UWB_TDOA, 'DEFAULT_CONFIG': '/no/existe/experimento.yaml', 'OUTPUT_DIR': 'salidas'}


@override_settings(UWB_TDOA=SIN_ARCHIVO)
class LoadConfigTest(SimpleTestCase):

    def test_valores_por_defecto(self):
        config = load_config()
        self.assertEqual(config['seed'], 0)
        self.assertEqual(config['model']['patching'], PatchStrategy.PER_CIR)
        self.assertEqual(config['model']['d_model'], 64)
        self.assertEqual(config['train']['max_epochs'], 350)
        self.assertEqual(config['train']['betas'], [0.9, 0.999])
        self.assertEqual(len(enumerate_grid(config['sweep']['blocks'])), 252)

    def test_overrides(self):
        config = load_config(overrides=['model.d_model=32', 'model.l_patch=75', 'train.betas=[0.8, 0.99]'],
                             seed=7, output_dir='/tmp/x')
        self.assertEqual(config['model']['d_model'], 32)
        self.assertEqual(config['model']['l_patch'], 75)
        self.assertEqual(config['train']['betas'], [0.8, 0.99])
        self.assertEqual(config['seed'], 7)
        self.assertEqual(output_path(config, 'a.csv'), Path('/tmp/x/a.csv'))
        self.assertEqual(output_path(config, '/abs/b.csv'), Path('/abs/b.csv'))

    def test_codificacion_incompatible(self):
        with self.assertRaises(serializers.ValidationError) as ctx:
            load_config(overrides=['model.patching=multi_cir', 'model.encoding=spatial'])
        self.assertIn(INCOMPATIBLE_ENCODING_MSG, str(ctx.exception.detail))

    def test_l_patch_que_no_divide(self):
        with self.assertRaises(serializers.ValidationError):
            load_config(overrides=['model.l_patch=7'])

    def test_d_model_del_barrido_divisible(self):
        with self.assertRaises(serializers.ValidationError):
            load_config(overrides=['model.n_heads=16'])

    def test_archivo_yaml(self):
        with tempfile.TemporaryDirectory() as tmp:
            ruta = Path(tmp) / 'exp.yaml'
            ruta.write_text("model:\n  encoding: learned\n  ordering: fixed\ntrain:\n  batch_size: 8\nseed: 3\n",
                            encoding='utf-8')
            config = load_config(ruta, overrides=['train.batch_size=16'])
        self.assertEqual(config['model']['encoding'], EncodingKind.LEARNED)
        self.assertEqual(config['train']['batch_size'], 16)
        self.assertEqual(config['seed'], 3)

    def test_archivo_inexistente(self):
        with self.assertRaises(InvalidConfigError):
            load_config('/no/existe/otro.yaml')

    def test_objetos_de_dominio(self):
        config = load_config(overrides=['model.encoding=spatial_time', 'model.n_layers=6'])
        cfg = model_config_from(config['model'])
        self.assertEqual(cfg.n_layers, 6)
        self.assertEqual(cfg.encoding.kind, EncodingKind.SPATIAL_TIME)
        self.assertEqual(cfg.encoding.d_model, cfg.d_model)
        train_cfg = train_config_from(config['train'], config['seed'], max_epochs=40)
        self.assertEqual(train_cfg.max_epochs, 40)
        self.assertEqual(environment_from(config['environment']).n_total, 15)


class OverrideTest(SimpleTestCase):

    def test_valor_yaml(self):
        self.assertEqual(parse_override('simulation.exclude_x=[10, 20]'), (['simulation', 'exclude_x'], [10, 20]))
        self.assertEqual(parse_override('simulation.fixed_z=null'), (['simulation', 'fixed_z'], None))

    def test_sin_igual(self):
        with self.assertRaises(InvalidConfigError):
            parse_override('model.d_model')

    def test_no_pisa_el_original(self):
        original = {'model': {'d_model': 64}}
        nuevo = apply_overrides(original, ['model.d_model=8'])
        self.assertEqual(original['model']['d_model'], 64)
        self.assertEqual(nuevo['model']['d_model'], 8)

    def test_campo_que_no_es_seccion(self):
        with self.assertRaises(InvalidConfigError):
            apply_overrides({'seed': 1}, ['seed.valor=2'])
