from rest_framework import serializers
from .models import barrido, resultadoBarrido
from .analysis.barrido import DEFAULT_GRID
from .channel.cir import WINDOW_LENGTH, Ordering
from .exceptions import INCOMPATIBLE_ENCODING_MSG
from .model.encodings import DEFAULT_DT_MAX_S, DEFAULT_OMEGA_MAX, DEFAULT_OMEGA_MIN, SPATIAL_KINDS, EncodingKind
from .model.patching import PatchStrategy
from .model.transformer import HEAD_WIDTHS
from .positioning.tdoa import PairPolicy

# Validación del archivo de experimento (YAML). Cada sección es un serializer anidado.

class EnvironmentSerializer(serializers.Serializer):
    path = serializers.CharField(required=False, allow_null=True, default=None)
    extent = serializers.ListField(child=serializers.FloatField(), min_length=3, max_length=3,
                                   required=False, allow_null=True, default=None)
    anchors = serializers.ListField(child=serializers.DictField(), required=False, allow_null=True, default=None)
    obstacles = serializers.ListField(child=serializers.DictField(), required=False, default=list)

    def validate_extent(self, value):
        if value is not None and any(v <= 0 for v in value):
            raise serializers.ValidationError("La extensión del entorno debe ser estrictamente positiva.")
        return value

    def validate_anchors(self, value):
        if value is None:
            return value
        for ancla in value:
            faltan = {'id', 'x', 'y', 'z'} - set(ancla)
            if faltan:
                raise serializers.ValidationError(f"Ancla sin los campos {sorted(faltan)}.")
        ids = [ancla['id'] for ancla in value]
        if len(ids) != len(set(ids)):
            raise serializers.ValidationError("Los ids de las anclas deben ser únicos.")
        return value


class SimulationSerializer(serializers.Serializer):
    # valores provisorios del simulador hasta contar con estadísticas del dataset real
    train_path = serializers.CharField(default='train.jsonl')
    eval_path = serializers.CharField(default='eval.jsonl')
    drop_probability = serializers.FloatField(default=0.0)
    target_available = serializers.FloatField(required=False, allow_null=True, default=None)
    snr_db = serializers.FloatField(allow_null=True, default=20.0)
    cir_length = serializers.IntegerField(default=256, min_value=WINDOW_LENGTH)
    nlos_direct_max = serializers.FloatField(default=0.3, min_value=0.0, max_value=1.0)
    nlos_excess_m = serializers.ListField(child=serializers.FloatField(min_value=0.0), min_length=2, max_length=2,
                                          default=lambda: [0.5, 15.0])
    n_multipath = serializers.ListField(child=serializers.IntegerField(min_value=0), min_length=2, max_length=2,
                                        default=lambda: [3, 8])
    train_spacing = serializers.FloatField(default=0.08, min_value=0.001)
    eval_points = serializers.IntegerField(default=1000, min_value=1)
    height = serializers.FloatField(default=1.0)
    pair_policy = serializers.ChoiceField(choices=PairPolicy.choices, default=PairPolicy.REFERENCE_ANCHOR)
    fixed_z = serializers.FloatField(required=False, allow_null=True, default=None)
    exclude_x = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2,
                                      required=False, allow_null=True, default=None)

    def validate_drop_probability(self, value):
        if not 0.0 <= value < 1.0:
            raise serializers.ValidationError("drop_probability debe estar en [0, 1).")
        return value

    def validate(self, data):
        for campo in ('nlos_excess_m', 'n_multipath'):
            lo, hi = data[campo]
            if lo > hi:
                raise serializers.ValidationError({campo: "El rango debe ser [mínimo, máximo]."})
        return data


class ModelConfigSerializer(serializers.Serializer):
    patching = serializers.ChoiceField(choices=PatchStrategy.choices, default=PatchStrategy.PER_CIR)
    l_patch = serializers.IntegerField(default=150, min_value=1)
    ordering = serializers.ChoiceField(choices=Ordering.choices, default=Ordering.TIME_BASED)
    encoding = serializers.ChoiceField(choices=EncodingKind.choices, default=EncodingKind.SPATIAL)
    d_model = serializers.IntegerField(default=64, min_value=1)
    n_layers = serializers.IntegerField(default=4, min_value=1)
    n_heads = serializers.IntegerField(default=8, min_value=1)
    d_ff = serializers.IntegerField(default=256, min_value=1)
    dropout_p = serializers.FloatField(default=0.15, min_value=0.0, max_value=0.99)
    head_widths = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=1,
                                        default=lambda: list(HEAD_WIDTHS))
    residual_output = serializers.BooleanField(default=True)
    zero_init_head = serializers.BooleanField(default=True)
    omega_min = serializers.FloatField(default=DEFAULT_OMEGA_MIN)
    omega_max = serializers.FloatField(default=DEFAULT_OMEGA_MAX)
    dt_max = serializers.FloatField(default=DEFAULT_DT_MAX_S)
    clamp = serializers.BooleanField(default=False)

    def validate_l_patch(self, value):
        if WINDOW_LENGTH % value != 0:
            raise serializers.ValidationError(f"L_patch={value} no divide {WINDOW_LENGTH}.")
        return value

    def validate_head_widths(self, value):
        if value[-1] != 3:
            raise serializers.ValidationError("La última capa de la cabeza debe tener 3 salidas.")
        return value

    def validate(self, data):
        if data['encoding'] in SPATIAL_KINDS and data['patching'] == PatchStrategy.MULTI_CIR:
            raise serializers.ValidationError({'encoding': INCOMPATIBLE_ENCODING_MSG})
        if data['d_model'] % data['n_heads'] != 0:
            raise serializers.ValidationError({'d_model': "d_model debe ser divisible por n_heads."})
        if data['encoding'] in SPATIAL_KINDS and data['d_model'] < 6:
            raise serializers.ValidationError({'d_model': "La codificación espacial requiere d_model >= 6."})
        if not 0 < data['omega_min'] < data['omega_max']:
            raise serializers.ValidationError({'omega_min': "Se requiere 0 < omega_min < omega_max."})
        if data['dt_max'] <= 0:
            raise serializers.ValidationError({'dt_max': "dt_max debe ser positivo."})
        return data


class TrainConfigSerializer(serializers.Serializer):
    batch_size = serializers.IntegerField(default=64, min_value=1)
    lr_peak = serializers.FloatField(default=1e-3)
    warmup_fraction = serializers.FloatField(default=0.05)
    max_epochs = serializers.IntegerField(default=350, min_value=1)
    early_stop_patience = serializers.IntegerField(default=25, min_value=1)
    betas = serializers.ListField(child=serializers.FloatField(min_value=0.0, max_value=0.999999),
                                  min_length=2, max_length=2, default=lambda: [0.9, 0.999])
    validation_fraction = serializers.FloatField(default=0.1)
    checkpoint = serializers.CharField(default='model.safetensors')

    def validate_warmup_fraction(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("warmup_fraction debe estar en (0, 1).")
        return value

    def validate_lr_peak(self, value):
        if value <= 0:
            raise serializers.ValidationError("lr_peak debe ser positivo.")
        return value

    def validate_validation_fraction(self, value):
        if not 0.0 <= value < 1.0:
            raise serializers.ValidationError("validation_fraction debe estar en [0, 1).")
        return value


class SweepBlockSerializer(serializers.Serializer):
    patching = serializers.ChoiceField(choices=PatchStrategy.choices)
    orderings = serializers.ListField(child=serializers.ChoiceField(choices=Ordering.choices), min_length=1)
    encodings = serializers.ListField(child=serializers.ChoiceField(choices=EncodingKind.choices), min_length=1)
    l_patches = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=1)
    d_models = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=1)

    def validate_l_patches(self, value):
        malos = [v for v in value if WINDOW_LENGTH % v != 0]
        if malos:
            raise serializers.ValidationError(f"Valores de L_patch que no dividen {WINDOW_LENGTH}: {malos}.")
        return value

    def validate(self, data):
        if data['patching'] == PatchStrategy.MULTI_CIR and any(e in SPATIAL_KINDS for e in data['encodings']):
            raise serializers.ValidationError({'encodings': INCOMPATIBLE_ENCODING_MSG})
        return data


class SweepSerializer(serializers.Serializer):
    name = serializers.CharField(default='barrido', max_length=120)
    blocks = SweepBlockSerializer(many=True, required=False)
    epochs = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=1)
    max_train_samples = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=1)
    n_av = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate(self, data):
        data.setdefault('blocks', [dict(b) for b in DEFAULT_GRID])
        return data


class ExperimentConfigSerializer(serializers.Serializer):
    environment = EnvironmentSerializer()
    simulation = SimulationSerializer()
    model = ModelConfigSerializer()
    train = TrainConfigSerializer()
    sweep = SweepSerializer()
    output_dir = serializers.CharField(default='salidas')
    seed = serializers.IntegerField(default=0, min_value=0)

    def validate(self, data):
        for bloque in data['sweep']['blocks']:
            malos = [d for d in bloque['d_models'] if d % data['model']['n_heads'] != 0]
            if malos:
                raise serializers.ValidationError(
                    {'sweep': f"d_model {malos} no es divisible por n_heads={data['model']['n_heads']}."})
        return data


# Representación de la API

class resultadoBarridoSerializer(serializers.ModelSerializer):
    class Meta:
        model = resultadoBarrido
        fields = '__all__'


class barridoSerializer(serializers.ModelSerializer):
    n_resultados = serializers.SerializerMethodField()
    n_fallidos = serializers.SerializerMethodField()

    class Meta:
        model = barrido
        fields = '__all__'

    def get_n_resultados(self, obj):
        return obj.resultados.count()

    def get_n_fallidos(self, obj):
        return obj.resultados.filter(estado='fallido').count()


class ComplejidadQuerySerializer(ModelConfigSerializer):
    n_total = serializers.IntegerField(default=15, min_value=1)
    n_av = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate(self, data):
        data = super().validate(data)
        if data['n_av'] is not None and not 0 < data['n_av'] <= data['n_total']:
            raise serializers.ValidationError({'n_av': "n_av debe estar en (0, n_total]."})
        return data
