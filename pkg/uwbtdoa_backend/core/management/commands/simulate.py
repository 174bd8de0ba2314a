from core.channel.simulador import evaluation_trajectory, generate_dataset, training_trajectory
from core.data.dataset_io import dataset_summary, write_dataset
from core.management.base import ExperimentCommand
from core.utils.config import drop_probability_from, output_path, simulation_params_from


class Command(ExperimentCommand):
    help = "Genera los datasets sintéticos de entrenamiento (líneas rectas) y evaluación (camino aleatorio)."

    def run(self, config, /, **options):
        sim = config['simulation']
        seed = config['seed']
        env = self.environment(config)
        params = simulation_params_from(sim)
        drop = drop_probability_from(sim, env)

        trayectorias = {
            'train': training_trajectory(env, spacing=sim['train_spacing'], height=sim['height']),
            'eval': evaluation_trajectory(env, n_points=sim['eval_points'], seed=seed + 1, height=sim['height']),
        }
        resumen = {'drop_probability': drop}
        for nombre, semilla in (('train', seed), ('eval', seed + 1)):
            samples = generate_dataset(env, trayectorias[nombre], drop, semilla, params=params,
                                       progress=self.progress)
            ruta = write_dataset(samples, output_path(config, sim[f'{nombre}_path']))
            resumen[nombre] = dataset_summary(samples, env)
            self.stdout.write(f"{nombre}: {len(samples)} muestras -> {ruta} "
                              f"({resumen[nombre]['mean_available']:.2f} anclas disponibles en promedio)")
        self.save_environment(config, env)
        self.write_json(config, 'dataset_summary.json', resumen)
