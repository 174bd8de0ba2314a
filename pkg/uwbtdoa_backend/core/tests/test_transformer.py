import math

import numpy as np
import torch
from django.test import SimpleTestCase
from hypothesis import given, strategies as st

from core.channel.cir import Ordering
from core.channel.simulador import SimulationParams, generate_dataset
from core.exceptions import IncompatibleEncodingError, InvalidArgumentError, InvalidConfigError, ShapeError
from core.model.encodings import EncodingKind
from core.model.entrenamiento import (TrainConfig, _dataset_loss, compute_gradients, evaluate, learning_rate,
                                      mse_loss, split_dataset, train)
from core.model.patching import PatchStrategy, TokenSequence
from core.model.transformer import (HEAD_WIDTHS, EncodedSample, ModelConfig, attention, build_model, collate,
                                    encode_dataset, encoder_forward, forward, max_token_count, predict,
                                    regression_head)
from core.positioning.baseline import run_baseline
from core.positioning.metricas import improvement_percent, mae
from core.tests.factories import WALL, box_environment, model_config, simulated_samples, wall_side_points


def naive_attention(q, k, v):
    n, h = q.shape
    out = torch.zeros_like(v)
    for i in range(n):
        scores = [float(q[i] @ k[j]) / math.sqrt(h) for j in range(k.shape[0])]
        m = max(scores)
        pesos = [math.exp(s - m) for s in scores]
        total = sum(pesos)
        for j in range(k.shape[0]):
            out[i] += pesos[j] / total * v[j]
    return out


def permuted(sample: EncodedSample, order) -> EncodedSample:
    return EncodedSample(sample_id=sample.sample_id, amplitudes=sample.amplitudes[order],
                         present=sample.present[order], positions=sample.positions[order],
                         time_offsets=sample.time_offsets[order], p_tdoa=sample.p_tdoa, target=sample.target)


class AttentionTest(SimpleTestCase):

    @given(st.integers(min_value=1, max_value=7), st.integers(min_value=1, max_value=6),
           st.integers(min_value=0, max_value=1000))
    def test_igual_al_lazo_ingenuo(self, n, h, seed):
        g = torch.Generator().manual_seed(seed)
        q, k, v = (torch.randn(n, h, generator=g, dtype=torch.float64) for _ in range(3))
        torch.testing.assert_close(attention(q, k, v), naive_attention(q, k, v), rtol=1e-10, atol=1e-12)

    def test_claves_enmascaradas_no_influyen(self):
        g = torch.Generator().manual_seed(1)
        q, k, v = (torch.randn(2, 5, 4, generator=g, dtype=torch.float64) for _ in range(3))
        mask = torch.tensor([[True, True, True, False, False], [True] * 5])
        base = attention(q, k, v, mask)
        v2 = v.clone()
        v2[0, 3:] = 100.0
        torch.testing.assert_close(attention(q, k, v2, mask)[0], base[0])
        torch.testing.assert_close(base[0], attention(q[0], k[0, :3], v[0, :3]))

    def test_formas_incompatibles(self):
        with self.assertRaises(ShapeError):
            attention(torch.zeros(3, 4), torch.zeros(3, 5), torch.zeros(3, 4))
        with self.assertRaises(ShapeError):
            attention(torch.zeros(3, 4), torch.zeros(3, 4), torch.zeros(2, 4))


class ModelConfigTest(SimpleTestCase):

    def test_espacial_con_multi_cir(self):
        with self.assertRaises(IncompatibleEncodingError):
            model_config(strategy=PatchStrategy.MULTI_CIR, l_patch=10)

    def test_d_model_no_divisible(self):
        with self.assertRaises(InvalidConfigError):
            model_config(d_model=18, n_heads=4)

    def test_ida_y_vuelta_por_dict(self):
        cfg = model_config(encoding=EncodingKind.SPATIAL_TIME)
        self.assertEqual(ModelConfig.from_dict(cfg.to_dict()), cfg)

    def test_tabla_aprendida_alcanza_para_todos_los_tokens(self):
        cfg = model_config(l_patch=1, ordering=Ordering.FIXED, encoding=EncodingKind.LEARNED)
        self.assertEqual(max_token_count(cfg, 15), 15 * 150 + 1)
        multi = model_config(strategy=PatchStrategy.MULTI_CIR, l_patch=5, encoding=EncodingKind.LEARNED)
        self.assertEqual(max_token_count(multi, 15), 31)


class ModelTestCase(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.env, samples = simulated_samples(n=16, drop_probability=0.4, seed=3)
        cls.baseline = run_baseline(samples, cls.env)
        cls.samples = samples

    def encoded(self, cfg):
        encoded, _ = encode_dataset(self.samples, self.env, cfg, self.baseline.estimates)
        return encoded


class PermutationInvarianceTest(ModelTestCase):

    def outputs_under_permutations(self, encoding):
        cfg = model_config(encoding=encoding, d_model=24, n_heads=4, zero_init_head=False, dropout_p=0.0)
        model = build_model(cfg, self.env, seed=5)
        muestra = max(self.encoded(cfg), key=lambda s: s.amplitudes.shape[0])
        rng = np.random.default_rng(0)
        n = muestra.amplitudes.shape[0]
        variantes = [muestra] + [permuted(muestra, rng.permutation(n)) for _ in range(50)]
        salidas = predict(model, variantes)
        return salidas[0], salidas[1:]

    def test_espacial_invariante_al_orden_de_las_anclas(self):
        original, permutadas = self.outputs_under_permutations(EncodingKind.SPATIAL)
        self.assertLess(np.max(np.abs(permutadas - original)), 1e-9)

    def test_espacial_con_tiempo_invariante(self):
        original, permutadas = self.outputs_under_permutations(EncodingKind.SPATIAL_TIME)
        self.assertLess(np.max(np.abs(permutadas - original)), 1e-9)

    def test_aprendida_depende_del_orden(self):
        original, permutadas = self.outputs_under_permutations(EncodingKind.LEARNED)
        self.assertGreater(np.max(np.abs(permutadas - original)), 1e-9)


class SafeStartTest(ModelTestCase):

    def test_modelo_sin_entrenar_devuelve_p_tdoa(self):
        for cfg in (model_config(),
                    model_config(strategy=PatchStrategy.MULTI_CIR, l_patch=30, encoding=EncodingKind.LEARNED),
                    model_config(ordering=Ordering.FIXED, encoding=EncodingKind.SPATIAL_TIME, l_patch=50)):
            encoded = self.encoded(cfg)
            salidas = predict(build_model(cfg, self.env, seed=0), encoded)
            np.testing.assert_array_equal(salidas, np.stack([s.p_tdoa for s in encoded]))

    def test_forward_de_una_muestra(self):
        cfg = model_config()
        model = build_model(cfg, self.env, seed=0)
        sample = next(s for s in self.samples if s.sample_id in self.baseline.estimates)
        salida = forward(sample, self.env, model)
        self.assertEqual(salida.shape, (3,))
        np.testing.assert_allclose(salida, self.baseline.estimates[sample.sample_id].position, atol=1e-9)

    def test_muestras_sin_solucion_se_omiten(self):
        cfg = model_config()
        encoded, omitidas = encode_dataset(self.samples, self.env, cfg, self.baseline.estimates)
        self.assertEqual(sorted(omitidas), sorted(self.baseline.unsolvable))
        self.assertEqual(len(encoded) + len(omitidas), len(self.samples))


class BatchTest(ModelTestCase):

    def test_salida_no_depende_del_batch(self):
        cfg = model_config(zero_init_head=False, dropout_p=0.0)
        model = build_model(cfg, self.env, seed=2)
        encoded = self.encoded(cfg)
        juntas = predict(model, encoded, batch_size=len(encoded))
        solas = np.concatenate([predict(model, [s]) for s in encoded])
        np.testing.assert_allclose(juntas, solas, atol=1e-10)

    def test_collate_rellena(self):
        encoded = self.encoded(model_config())
        batch = collate(encoded)
        n_max = max(s.amplitudes.shape[0] for s in encoded)
        self.assertEqual(tuple(batch.amplitudes.shape), (len(encoded), n_max, 150))
        self.assertEqual(batch.row_mask.sum().item(), sum(s.amplitudes.shape[0] for s in encoded))

    def test_batch_vacio(self):
        with self.assertRaises(InvalidArgumentError):
            collate([])


class GradientCheckTest(ModelTestCase):

    def test_gradientes_contra_diferencias_finitas(self):
        cfg = model_config(l_patch=75, d_model=8, n_heads=2, n_layers=1, d_ff=16, head_widths=(16, 3),
                           zero_init_head=False, dropout_p=0.0)
        model = build_model(cfg, self.env, seed=1)
        model.eval()
        batch = collate(self.encoded(cfg)[:3])
        analiticos = compute_gradients(model, batch)
        rng = np.random.default_rng(0)
        eps = 1e-5
        for nombre, p in model.named_parameters():
            plano = p.data.view(-1)
            for idx in rng.choice(plano.numel(), size=min(3, plano.numel()), replace=False):
                original = plano[idx].item()
                with torch.no_grad():
                    plano[idx] = original + eps
                    arriba = mse_loss(model, batch).item()
                    plano[idx] = original - eps
                    abajo = mse_loss(model, batch).item()
                    plano[idx] = original
                numerico = (arriba - abajo) / (2 * eps)
                analitico = analiticos[nombre].view(-1)[idx].item()
                escala = max(abs(numerico), abs(analitico), 1e-5)
                self.assertLess(abs(numerico - analitico) / escala, 1e-4, msg=f"{nombre}[{idx}]")

    def test_todos_los_parametros_tienen_gradiente(self):
        cfg = model_config(zero_init_head=False, dropout_p=0.0)
        model = build_model(cfg, self.env, seed=1)
        grads = compute_gradients(model, collate(self.encoded(cfg)))
        self.assertEqual(set(grads), {n for n, _ in model.named_parameters()})
        self.assertTrue(all(torch.isfinite(g).all() for g in grads.values()))


class LearningRateTest(SimpleTestCase):

    def test_subida_y_bajada_lineal(self):
        total, peak = 1000, 1e-3
        self.assertEqual(learning_rate(0, total, peak, 0.05), 0.0)
        self.assertAlmostEqual(learning_rate(25, total, peak, 0.05), peak / 2)
        self.assertAlmostEqual(learning_rate(50, total, peak, 0.05), peak)
        self.assertAlmostEqual(learning_rate(525, total, peak, 0.05), peak / 2)
        self.assertEqual(learning_rate(total, total, peak, 0.05), 0.0)

    @given(st.integers(min_value=10, max_value=5000), st.floats(min_value=0.01, max_value=0.5))
    def test_acotada_por_el_pico(self, total, warmup):
        lrs = [learning_rate(s, total, 1e-3, warmup) for s in range(0, total + 1, max(1, total // 50))]
        self.assertTrue(all(0.0 <= lr <= 1e-3 + 1e-15 for lr in lrs))

    def test_configuracion_invalida(self):
        with self.assertRaises(InvalidConfigError):
            TrainConfig(warmup_fraction=0.0)
        with self.assertRaises(InvalidConfigError):
            TrainConfig(batch_size=0)


class TrainTest(ModelTestCase):

    def test_determinista_con_la_misma_semilla(self):
        cfg = model_config(d_model=8, n_heads=2, n_layers=1, d_ff=16, head_widths=(16, 3))
        train_cfg = TrainConfig(batch_size=4, max_epochs=3, seed=4, validation_fraction=0.2)
        encoded = self.encoded(cfg)
        a = train(encoded, cfg, train_cfg, self.env)
        b = train(encoded, cfg, train_cfg, self.env)
        self.assertEqual(a.training_history, b.training_history)
        for (nombre, pa), (_, pb) in zip(a.state_dict().items(), b.state_dict().items()):
            torch.testing.assert_close(pa, pb, rtol=0, atol=0, msg=nombre)
        self.assertEqual(len(a.training_history), 3)
        self.assertEqual(a.training_history[0]['epoch'], 0)

    def test_division_de_validacion(self):
        encoded = self.encoded(model_config())
        train_set, val_set = split_dataset(encoded, 0.25, seed=0)
        self.assertEqual(len(train_set) + len(val_set), len(encoded))
        self.assertEqual(len(val_set), round(0.25 * len(encoded)))
        self.assertFalse({s.sample_id for s in train_set} & {s.sample_id for s in val_set})

    def test_dataset_vacio(self):
        with self.assertRaises(InvalidArgumentError):
            train([], model_config(), TrainConfig(), self.env)


def pesos(linear):
    return linear.weight.detach().numpy(), linear.bias.detach().numpy()


def layer_norm(x, ln):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + ln.eps) * ln.weight.detach().numpy() + ln.bias.detach().numpy()


def token_sequence(x):
    B, n, _ = x.shape
    return TokenSequence(tokens=x, positions=torch.zeros(B, n, 3, dtype=x.dtype),
                         time_offsets=torch.zeros(B, n, dtype=x.dtype),
                         within_index=torch.arange(n) - 1, row_index=torch.zeros(n, dtype=torch.long) - 1,
                         key_mask=torch.ones(B, n, dtype=torch.bool))


class EncoderByHandTest(SimpleTestCase):

    def test_una_capa_una_cabeza_dos_tokens(self):
        cfg = model_config(strategy=PatchStrategy.MULTI_CIR, encoding=EncodingKind.LEARNED, d_model=4, n_heads=1,
                           n_layers=1, d_ff=8, dropout_p=0.0)
        model = build_model(cfg, box_environment(), seed=13)
        x = np.random.default_rng(2).normal(size=(2, 4))
        salida = encoder_forward(token_sequence(torch.as_tensor(x[None])), model).tokens[0].detach().numpy()

        bloque = model.layers[0]
        (wq, bq), (wk, bk), (wv, bv), (wo, bo) = (pesos(bloque.attn.q), pesos(bloque.attn.k),
                                                  pesos(bloque.attn.v), pesos(bloque.attn.out))
        q, k, v = x @ wq.T + bq, x @ wk.T + bk, x @ wv.T + bv
        scores = q @ k.T / 2.0  # √4
        alfa = np.exp(scores - scores.max(axis=1, keepdims=True))
        alfa /= alfa.sum(axis=1, keepdims=True)
        x1 = layer_norm(x + (alfa @ v) @ wo.T + bo, bloque.norm1)
        (w1, b1), (w2, b2) = pesos(bloque.ff1), pesos(bloque.ff2)
        esperado = layer_norm(x1 + np.maximum(x1 @ w1.T + b1, 0.0) @ w2.T + b2, bloque.norm2)
        np.testing.assert_allclose(salida, esperado, atol=1e-12)


class RegressionHeadTest(SimpleTestCase):

    def setUp(self):
        self.env = box_environment()

    def test_anchos_por_defecto(self):
        model = build_model(ModelConfig(), self.env)
        anchos = [(capa.in_features, capa.out_features) for capa in model.head]
        self.assertEqual(HEAD_WIDTHS, (256, 128, 64, 3))
        self.assertEqual(anchos, [(64 + 3, 256), (256, 128), (128, 64), (64, 3)])

    def test_anchos_con_d_model_chico(self):
        model = build_model(model_config(d_model=16, head_widths=HEAD_WIDTHS), self.env)
        self.assertEqual([c.in_features for c in model.head], [19, 256, 128, 64])
        self.assertEqual(model.head[-1].out_features, 3)

    def test_pesos_nulos_sin_residual_devuelve_el_sesgo(self):
        model = build_model(model_config(residual_output=False), self.env, seed=1)
        with torch.no_grad():
            for capa in model.head:
                capa.weight.zero_()
            model.head[-1].bias.copy_(torch.tensor([1.5, -2.0, 0.25], dtype=torch.float64))
        generador = torch.Generator().manual_seed(0)
        cls_out = torch.randn(5, 16, dtype=torch.float64, generator=generador)
        p_tdoa = 20.0 * torch.rand(5, 3, dtype=torch.float64, generator=generador)
        salida = regression_head(cls_out, p_tdoa, model)
        torch.testing.assert_close(salida, torch.tensor([[1.5, -2.0, 0.25]] * 5, dtype=torch.float64))

    def test_con_residual_suma_p_tdoa(self):
        model = build_model(model_config(), self.env, seed=1)
        p_tdoa = torch.tensor([[4.0, 5.0, 1.0]], dtype=torch.float64)
        salida = regression_head(torch.zeros(1, 16, dtype=torch.float64), p_tdoa, model)
        # cabeza con la última capa en cero
        torch.testing.assert_close(salida, p_tdoa)


def encoded_wall_dataset(env, cfg, n, seed, params):
    samples = generate_dataset(env, wall_side_points(n, seed), 0.0, seed, params=params)
    encoded, _ = encode_dataset(samples, env, cfg, run_baseline(samples, env).estimates)
    return encoded


class LearningTest(SimpleTestCase):
    """Con datos sintéticos chicos el entrenamiento tiene que aprender algo útil."""

    def test_la_perdida_baja_diez_veces(self):
        env = box_environment()
        cfg = model_config(strategy=PatchStrategy.MULTI_CIR, encoding=EncodingKind.LEARNED, d_model=16,
                           n_layers=1, dropout_p=0.0, residual_output=False)
        dataset = encoded_wall_dataset(env, cfg, 200, 21, SimulationParams(snr_db=None))
        self.assertEqual(len(dataset), 200)
        train_cfg = TrainConfig(batch_size=32, lr_peak=1e-2, max_epochs=150, early_stop_patience=150,
                                validation_fraction=0.0, seed=3)
        inicial = _dataset_loss(build_model(cfg, env, seed=train_cfg.seed), dataset, 64)
        model = train(dataset, cfg, train_cfg, env)
        final = _dataset_loss(model, dataset, 64)
        self.assertLessEqual(final, inicial / 10.0)
        self.assertLess(model.training_history[-1]['train_loss'], model.training_history[0]['train_loss'])


class NlosCorrectionTest(SimpleTestCase):
    """Pared central con exceso NLOS fijo: el sesgo del baseline depende solo de la posición."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        env = box_environment(obstacles=[WALL])
        params = SimulationParams(snr_db=None, nlos_excess_m=(2.0, 2.0))
        cfg = model_config(strategy=PatchStrategy.MULTI_CIR, encoding=EncodingKind.LEARNED, d_model=16,
                           n_layers=1, dropout_p=0.0, head_widths=(64, 32, 3))
        train_set = encoded_wall_dataset(env, cfg, 400, 31, params)
        cls.eval_set = encoded_wall_dataset(env, cfg, 100, 32, params)
        train_cfg = TrainConfig(batch_size=32, lr_peak=5e-3, max_epochs=120, early_stop_patience=40,
                                validation_fraction=0.1, seed=5)
        cls.model = train(train_set, cfg, train_cfg, env)
        cls.baseline_mae = mae(np.stack([s.p_tdoa for s in cls.eval_set]), np.stack([s.target for s in cls.eval_set]))
        cls.report, _ = evaluate(cls.model, cls.eval_set)

    def test_el_baseline_tiene_sesgo(self):
        self.assertGreater(self.baseline_mae, 0.1)

    def test_corrige_muestras_no_vistas(self):
        self.assertLess(self.report.mae, self.baseline_mae)

    def test_mejora_de_al_menos_treinta_por_ciento(self):
        self.assertGreaterEqual(improvement_percent(self.baseline_mae, self.report.mae), 30.0)
