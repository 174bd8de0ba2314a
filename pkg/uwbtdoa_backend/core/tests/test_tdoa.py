import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, strategies as st

from core.exceptions import (InsufficientAnchorsError, InsufficientDataError, InvalidArgumentError,
                             MissingAnchorError)
from core.positioning.tdoa import (SPEED_OF_LIGHT, Anchor, DdoaSet, PairPolicy, measured_ddoa_set, residuals,
                                   solve_from_timestamps, solve_tdoa, true_ddoa, true_ddoa_set)


def random_geometry(rng):
    """8 anclas en las esquinas de una caja con jitter y un tag dentro de la envolvente."""
    esquinas = np.array([(x, y, z) for x in (0.0, 20.0) for y in (0.0, 20.0) for z in (0.0, 5.0)])
    posiciones = esquinas + rng.uniform(-2.0, 2.0, size=esquinas.shape)
    anclas = [Anchor(id=n, position=p) for n, p in enumerate(posiciones)]
    tag = rng.uniform([3.0, 3.0, 1.5], [17.0, 17.0, 3.5])
    return anclas, tag


class SolverRoundTripTest(SimpleTestCase):

    def test_recupera_posicion_sin_ruido(self):
        rng = np.random.default_rng(2024)
        aciertos = 0
        for _ in range(200):
            anclas, tag = random_geometry(rng)
            est = solve_tdoa(true_ddoa_set(tag, anclas), anclas)
            if np.linalg.norm(est.position - tag) < 1e-6:
                aciertos += 1
        self.assertGreaterEqual(aciertos / 200, 0.99)

    def test_todas_las_parejas(self):
        rng = np.random.default_rng(5)
        anclas, tag = random_geometry(rng)
        ddoas = true_ddoa_set(tag, anclas, PairPolicy.ALL_PAIRS)
        self.assertEqual(len(ddoas), 8 * 7 // 2)
        est = solve_tdoa(ddoas, anclas)
        self.assertTrue(est.converged)
        np.testing.assert_allclose(est.position, tag, atol=1e-6)

    def test_desde_marcas_de_tiempo(self):
        rng = np.random.default_rng(11)
        anclas, tag = random_geometry(rng)
        tx = 0.25
        timestamps = {a.id: tx + np.linalg.norm(tag - a.position) / SPEED_OF_LIGHT for a in anclas}
        est = solve_from_timestamps(timestamps, anclas)
        np.testing.assert_allclose(est.position, tag, atol=1e-5)

    def test_z_fijo(self):
        rng = np.random.default_rng(3)
        anclas, tag = random_geometry(rng)
        est = solve_tdoa(true_ddoa_set(tag, anclas), anclas, fixed_z=tag[2])
        self.assertEqual(est.position[2], tag[2])
        np.testing.assert_allclose(est.position, tag, atol=1e-6)


class ResidualsTest(SimpleTestCase):

    @given(st.integers(min_value=0, max_value=10_000))
    def test_residuos_nulos_en_la_posicion_verdadera(self, seed):
        anclas, tag = random_geometry(np.random.default_rng(seed))
        r = residuals(tag, true_ddoa_set(tag, anclas), anclas)
        np.testing.assert_allclose(r, 0.0, atol=1e-9)

    def test_true_ddoa_es_antisimetrica(self):
        a, b = Anchor(1, (0, 0, 0)), Anchor(2, (4, 0, 0))
        p = (1.0, 1.0, 0.0)
        self.assertAlmostEqual(true_ddoa(p, a, b), -true_ddoa(p, b, a))

    @given(st.integers(min_value=0, max_value=10_000))
    def test_identidad_del_triangulo(self, seed):
        anclas, tag = random_geometry(np.random.default_rng(seed))
        a, b, c = anclas[0], anclas[3], anclas[6]
        self.assertAlmostEqual(true_ddoa(tag, a, b) + true_ddoa(tag, b, c), true_ddoa(tag, a, c), places=9)


class LocalMinimumTest(SimpleTestCase):

    def test_perturbaciones_no_bajan_el_costo(self):
        rng = np.random.default_rng(77)
        anclas, tag = random_geometry(rng)
        exactas = true_ddoa_set(tag, anclas, PairPolicy.ALL_PAIRS)
        ruidosas = DdoaSet(pairs=tuple((i, j, d + rng.normal(0.0, 0.05)) for i, j, d in exactas.pairs),
                           anchor_ids=exactas.anchor_ids)
        est = solve_tdoa(ruidosas, anclas)
        self.assertTrue(est.converged)

        def costo(q):
            r = residuals(q, ruidosas, anclas)
            return float(r @ r)

        base = costo(est.position)
        self.assertAlmostEqual(math.sqrt(base), est.residual_norm, places=9)
        for _ in range(100):
            delta = rng.normal(0.0, 0.05, size=3)
            self.assertGreaterEqual(costo(est.position + delta), base - 1e-12)


class SearchBoundsTest(SimpleTestCase):

    def setUp(self):
        self.lo = np.zeros(3)
        self.hi = np.array([20.0, 20.0, 5.0])

    def test_exacta_no_cambia_con_cotas(self):
        rng = np.random.default_rng(8)
        anclas, tag = random_geometry(rng)
        # anclas con jitter pueden caer fuera de la caja; solo importa el tag
        est = solve_tdoa(true_ddoa_set(tag, anclas), anclas, bounds=(self.lo - 3.0, self.hi + 3.0))
        np.testing.assert_allclose(est.position, tag, atol=1e-6)
        self.assertFalse(est.on_boundary)

    def test_sesgo_grande_queda_dentro_de_la_caja(self):
        anclas = [Anchor(1, (1.0, 1.0, 0.5)), Anchor(2, (19.0, 1.0, 4.5)), Anchor(3, (1.0, 19.0, 4.5)),
                  Anchor(4, (19.0, 19.0, 0.5))]
        tag = np.array([5.0, 6.0, 1.0])
        exactas = true_ddoa_set(tag, anclas)
        sesgadas = DdoaSet(pairs=tuple((i, j, d + 12.0) for i, j, d in exactas.pairs),
                           anchor_ids=exactas.anchor_ids)
        est = solve_tdoa(sesgadas, anclas, bounds=(self.lo, self.hi))
        self.assertTrue(np.all(est.position >= self.lo) and np.all(est.position <= self.hi))
        self.assertTrue(np.all(np.isfinite(est.position)))

    def test_z_fijo_respeta_la_altura(self):
        anclas = [Anchor(1, (1.0, 1.0, 0.5)), Anchor(2, (19.0, 1.0, 4.5)), Anchor(3, (1.0, 19.0, 4.5)),
                  Anchor(4, (19.0, 19.0, 0.5))]
        est = solve_tdoa(true_ddoa_set((5.0, 6.0, 1.0), anclas), anclas, fixed_z=1.0, bounds=(self.lo, self.hi))
        self.assertEqual(est.position[2], 1.0)
        np.testing.assert_allclose(est.position, (5.0, 6.0, 1.0), atol=1e-6)

    def test_cotas_invertidas(self):
        anclas, tag = random_geometry(np.random.default_rng(1))
        with self.assertRaises(InvalidArgumentError):
            solve_tdoa(true_ddoa_set(tag, anclas), anclas, bounds=(self.hi, self.lo))


class DdoaSetTest(SimpleTestCase):

    def test_ancla_de_referencia_es_la_mas_temprana(self):
        ddoas = measured_ddoa_set({3: 2e-9, 1: 1e-9, 2: 1e-9})
        # empate en 1 ns: gana el id menor
        self.assertTrue(all(j == 1 for _, j, _ in ddoas.pairs))
        self.assertEqual(len(ddoas), 2)

    def test_ddoa_en_metros(self):
        ddoas = measured_ddoa_set({1: 10e-9, 2: 0.0}, PairPolicy.ALL_PAIRS)
        (i, j, d), = ddoas.pairs
        self.assertEqual((i, j), (1, 2))
        self.assertAlmostEqual(d, SPEED_OF_LIGHT * 10e-9)

    def test_par_repetido(self):
        with self.assertRaises(InvalidArgumentError):
            DdoaSet(pairs=((1, 2, 0.5), (1, 2, 0.7)), anchor_ids=(1, 2))

    def test_par_con_la_misma_ancla(self):
        with self.assertRaises(InvalidArgumentError):
            DdoaSet(pairs=((1, 1, 0.0),), anchor_ids=(1,))

    def test_una_sola_marca(self):
        with self.assertRaises(InsufficientDataError):
            measured_ddoa_set({1: 0.0})


class SolverErrorsTest(SimpleTestCase):

    def test_menos_de_tres_anclas(self):
        anclas = [Anchor(1, (0, 0, 0)), Anchor(2, (5, 0, 0))]
        with self.assertRaises(InsufficientAnchorsError):
            solve_tdoa(true_ddoa_set((1, 1, 1), anclas), anclas)

    def test_dos_pares_en_3d(self):
        anclas = [Anchor(1, (0, 0, 0)), Anchor(2, (10, 0, 1)), Anchor(3, (0, 10, 2))]
        ddoas = true_ddoa_set((3.0, 4.0, 1.0), anclas)
        self.assertEqual(len(ddoas), 2)
        with self.assertRaises(InsufficientAnchorsError):
            solve_tdoa(ddoas, anclas)

    def test_dos_pares_con_z_fijo(self):
        anclas = [Anchor(1, (0, 0, 0)), Anchor(2, (10, 0, 1)), Anchor(3, (0, 10, 2))]
        tag = np.array([3.0, 4.0, 1.0])
        est = solve_tdoa(true_ddoa_set(tag, anclas), anclas, init=tag + (0.5, -0.5, 0.0), fixed_z=1.0)
        self.assertLess(est.residual_norm, 1e-6)

    def test_ancla_sin_posicion(self):
        anclas = [Anchor(1, (0, 0, 0)), Anchor(2, (5, 0, 0)), Anchor(3, (0, 5, 0))]
        ddoas = DdoaSet(pairs=((1, 2, 0.1), (3, 2, 0.2), (4, 2, 0.3)), anchor_ids=(1, 2, 3, 4))
        with self.assertRaises(MissingAnchorError):
            solve_tdoa(ddoas, anclas)

    def test_posicion_no_finita(self):
        with self.assertRaises(InvalidArgumentError):
            Anchor(1, (0.0, float('nan'), 0.0))


class PairPolicyTest(SimpleTestCase):

    def test_constantes_planas(self):
        self.assertIs(type(PairPolicy.REFERENCE_ANCHOR), str)
        self.assertEqual(PairPolicy.values, ('all_pairs', 'reference_anchor'))
        self.assertEqual(PairPolicy.choices, [('all_pairs', 'all_pairs'), ('reference_anchor', 'reference_anchor')])
