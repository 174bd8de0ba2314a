import numpy as np
import pandas as pd

from core.management.base import ExperimentCommand
from core.positioning.baseline import run_baseline
from core.positioning.metricas import metrics_report
from core.utils.config import output_path


class Command(ExperimentCommand):
    help = "Posición TDoA sin corrección: métricas y estimaciones por muestra."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--dataset', help='Dataset JSONL (por defecto simulation.eval_path).')

    def run(self, config, /, **options):
        sim = config['simulation']
        env = self.environment(config)
        samples = self.samples(config, options['dataset'] or sim['eval_path'])
        resultado = run_baseline(samples, env, sim['pair_policy'], sim['fixed_z'], progress=self.progress)

        filas = []
        for s in samples:
            est = resultado.estimates.get(s.sample_id)
            fila = {'sample_id': s.sample_id, 'n_anchors': len(s.raw_cirs),
                    'x_true': s.true_position[0], 'y_true': s.true_position[1], 'z_true': s.true_position[2],
                    'solved': est is not None}
            if est is not None:
                fila.update(x=est.position[0], y=est.position[1], z=est.position[2],
                            error=float(np.linalg.norm(est.position - s.true_position)),
                            residual_norm=est.residual_norm, converged=est.converged,
                            on_boundary=est.on_boundary)
            filas.append(fila)
        pd.DataFrame(filas).to_csv(output_path(config, 'baseline_estimates.csv'), index=False)

        resueltas = [s for s in samples if s.sample_id in resultado.estimates]
        if not resueltas:
            self.stderr.write("Ninguna muestra tiene al menos 3 anclas; no hay métricas.")
            return
        report = metrics_report([resultado.estimates[s.sample_id].position for s in resueltas],
                                [s.true_position for s in resueltas])
        metricas = {**report.to_dict(), 'n_unsolvable': len(resultado.unsolvable)}
        self.write_json(config, 'baseline_metrics.json', metricas)
        self.stdout.write(f"MAE baseline {report.mae:.3f} m sobre {report.n_samples} muestras "
                          f"({len(resultado.unsolvable)} sin solución)")
