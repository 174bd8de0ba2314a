import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, strategies as st

from core.analysis.barrido import DEFAULT_GRID, enumerate_grid
from core.analysis.complejidad import (Architecture, SweepResult, architecture_of, cnn_baseline_ops,
                                       complexity_curve, head_ops, op_count, pareto_front)
from core.channel.cir import Ordering
from core.exceptions import IncompatibleEncodingError, InvalidArgumentError
from core.model.encodings import EncodingConfig, EncodingKind
from core.model.patching import PatchConfig, PatchStrategy
from core.model.transformer import ModelConfig


def cfg(strategy, ordering, l_patch=75, d_model=32, encoding=EncodingKind.LEARNED):
    return ModelConfig(patch=PatchConfig(strategy, l_patch), encoding=EncodingConfig(kind=encoding, d_model=d_model),
                       ordering=ordering, d_model=d_model, n_heads=8)


def dominated_oracle(records):
    """O(n²): no dominado si ningún otro es <= en ambos ejes y < en alguno."""
    frente = []
    for r in records:
        dominado = any(
            s['total_ops'] <= r['total_ops'] and s['mae'] <= r['mae']
            and (s['total_ops'] < r['total_ops'] or s['mae'] < r['mae'])
            for s in records)
        if not dominado:
            frente.append(r['id'])
    return sorted(frente)


class OpCountTest(SimpleTestCase):

    def test_cnn_de_referencia(self):
        self.assertEqual(cnn_baseline_ops(15), 2_605_560)
        self.assertEqual(cnn_baseline_ops(0), 0)
        with self.assertRaises(InvalidArgumentError):
            cnn_baseline_ops(-1)

    def test_punto_de_comparacion(self):
        multi = op_count(cfg(PatchStrategy.MULTI_CIR, Ordering.FIXED), 15, 6).total_ops
        temporal = op_count(cfg(PatchStrategy.PER_CIR, Ordering.TIME_BASED), 15, 6).total_ops
        fijo = op_count(cfg(PatchStrategy.PER_CIR, Ordering.FIXED), 15, 6).total_ops
        self.assertEqual(multi, 221_568)
        self.assertEqual(temporal, 526_528)
        self.assertEqual(fijo, 1_260_928)
        self.assertLess(multi, temporal)
        self.assertLess(temporal, fijo)

    def test_desglose(self):
        conteo = op_count(cfg(PatchStrategy.PER_CIR, Ordering.TIME_BASED), 15, 6)
        self.assertEqual(conteo.n_tokens, 13)
        self.assertEqual(conteo.embedding_ops, 6 * 150 * 32)
        self.assertEqual(conteo.attention_ops, 13 ** 2 * 32)
        self.assertEqual(conteo.feedforward_ops, 13 * 32 * 256)
        self.assertEqual(conteo.head_ops, head_ops(32, (256, 128, 64, 3)))
        self.assertEqual(conteo.to_dict()['total_ops'], conteo.total_ops)

    def test_temporal_no_depende_de_n_total(self):
        temporal = cfg(PatchStrategy.PER_CIR, Ordering.TIME_BASED)
        self.assertEqual(op_count(temporal, 15, 6).total_ops, op_count(temporal, 50, 6).total_ops)
        fijo = cfg(PatchStrategy.PER_CIR, Ordering.FIXED)
        self.assertLess(op_count(fijo, 15, 6).total_ops, op_count(fijo, 50, 6).total_ops)

    def test_n_av_invalido(self):
        with self.assertRaises(InvalidArgumentError):
            op_count(cfg(PatchStrategy.PER_CIR, Ordering.TIME_BASED), 15, 16)
        with self.assertRaises(InvalidArgumentError):
            op_count(cfg(PatchStrategy.PER_CIR, Ordering.TIME_BASED), 0)

    def test_arquitecturas(self):
        self.assertEqual(architecture_of(cfg(PatchStrategy.MULTI_CIR, Ordering.TIME_BASED)), Architecture.MULTI_CIR)
        self.assertEqual(architecture_of(cfg(PatchStrategy.PER_CIR, Ordering.FIXED)), Architecture.PER_CIR_FIXED)

    @given(st.sampled_from([1, 3, 5, 6, 10, 15, 30, 50, 75, 150]))
    def test_menos_tokens_con_parches_mas_grandes(self, l_patch):
        base = cfg(PatchStrategy.PER_CIR, Ordering.FIXED, l_patch=l_patch)
        self.assertEqual(op_count(base, 15).n_tokens, 15 * (150 // l_patch) + 1)

    def test_curva(self):
        curva = complexity_curve(cfg(PatchStrategy.PER_CIR, Ordering.FIXED), [5, 75, 150], 15, 6)
        self.assertEqual(list(curva.columns), ['l_patch', 'multi_cir', 'per_cir_fixed', 'per_cir_time', 'cnn'])
        self.assertEqual(curva.loc[curva['l_patch'] == 75, 'per_cir_time'].item(), 526_528)
        self.assertTrue((curva['cnn'] == 2_605_560).all())
        self.assertTrue(curva['per_cir_fixed'].is_monotonic_decreasing)


class ParetoTest(SimpleTestCase):

    def records(self, seed, n=252):
        rng = np.random.default_rng(seed)
        ops = rng.integers(1_000, 60_000, size=n) // 500 * 500  # con empates en operaciones
        maes = np.round(rng.uniform(0.3, 2.0, size=n), 2)  # y en MAE
        return [{'id': i, 'total_ops': int(o), 'mae': float(m)} for i, (o, m) in enumerate(zip(ops, maes))]

    def test_igual_al_oraculo(self):
        for seed in range(10):
            records = self.records(seed)
            frente = pareto_front(records)
            self.assertEqual(sorted(r['id'] for r in frente), dominated_oracle(records))

    def test_ordenado_por_operaciones(self):
        frente = pareto_front(self.records(3))
        ops = [r['total_ops'] for r in frente]
        maes = [r['mae'] for r in frente]
        self.assertEqual(ops, sorted(ops))
        self.assertTrue(all(b <= a for a, b in zip(maes, maes[1:])))

    @given(st.lists(st.tuples(st.integers(min_value=0, max_value=20), st.integers(min_value=0, max_value=20)),
                    max_size=40))
    def test_oraculo_con_hypothesis(self, pares):
        records = [{'id': i, 'total_ops': o, 'mae': float(m)} for i, (o, m) in enumerate(pares)]
        self.assertEqual(sorted(r['id'] for r in pareto_front(records)), dominated_oracle(records))

    def test_con_objetos(self):
        base = cfg(PatchStrategy.PER_CIR, Ordering.FIXED)
        resultados = [SweepResult(config=base, total_ops=10, mae=1.0), SweepResult(config=base, total_ops=20, mae=0.5),
                      SweepResult(config=base, total_ops=30, mae=0.7)]
        self.assertEqual([r.total_ops for r in pareto_front(resultados)], [10, 20])

    def test_resultado_invalido(self):
        base = cfg(PatchStrategy.PER_CIR, Ordering.FIXED)
        with self.assertRaises(InvalidArgumentError):
            SweepResult(config=base, total_ops=10, mae=-0.1)
        with self.assertRaises(InvalidArgumentError):
            SweepResult(config=base, total_ops=10, mae=0.5, cep={50: 0.6, 90: 0.4})


class GridTest(SimpleTestCase):

    def test_grilla_completa(self):
        entradas = enumerate_grid(DEFAULT_GRID)
        self.assertEqual(len(entradas), 252)
        self.assertEqual(len({e['clave'] for e in entradas}), 252)

    def test_solo_multi_cir(self):
        self.assertEqual(len(enumerate_grid(DEFAULT_GRID[:1])), 108)
        self.assertEqual(len(enumerate_grid(DEFAULT_GRID[1:])), 144)

    def test_espacial_no_permitida_en_multi_cir(self):
        bloque = dict(DEFAULT_GRID[0], encodings=[EncodingKind.SPATIAL])
        with self.assertRaises(IncompatibleEncodingError):
            enumerate_grid([bloque])
