from django.db import models

# Create your models here.

class barrido(models.Model):
    ESTADO_BARRIDO = [
        ('pendiente', 'pendiente'),
        ('en_curso', 'en_curso'),
        ('completado', 'completado'),
        ('fallido', 'fallido'),
    ]

    name = models.CharField(max_length=120, unique=True)
    config = models.JSONField(default=dict)  # ExperimentConfig validada
    estado = models.CharField(max_length=20, choices=ESTADO_BARRIDO, default='pendiente', db_index=True)
    fecha_creacion = models.DateTimeField(auto_now_add=True)
    fecha_actualizacion = models.DateTimeField(auto_now=True)

    def __str__(self):
        return f"{self.name} ({self.estado})"

    def claves_completadas(self) -> set:
        return set(self.resultados.filter(estado='ok').values_list('clave', flat=True))


class resultadoBarrido(models.Model):
    ESTADO_RESULTADO = [
        ('ok', 'ok'),
        ('fallido', 'fallido'),
    ]

    barrido = models.ForeignKey(barrido, on_delete=models.CASCADE, related_name='resultados')
    clave = models.CharField(max_length=120)
    patching = models.CharField(max_length=20)
    ordering = models.CharField(max_length=20)
    encoding = models.CharField(max_length=20)
    l_patch = models.PositiveIntegerField()
    d_model = models.PositiveIntegerField()
    total_ops = models.BigIntegerField(blank=True, null=True)  # None si la configuración es inválida
    mae = models.FloatField(blank=True, null=True)
    cep50 = models.FloatField(blank=True, null=True)
    cep75 = models.FloatField(blank=True, null=True)
    cep90 = models.FloatField(blank=True, null=True)
    cep95 = models.FloatField(blank=True, null=True)
    cep99 = models.FloatField(blank=True, null=True)
    n_eval = models.PositiveIntegerField(default=0)
    estado = models.CharField(max_length=10, choices=ESTADO_RESULTADO, default='ok', db_index=True)
    error = models.TextField(blank=True, null=True)
    duracion_s = models.FloatField(default=0.0)
    fecha_creacion = models.DateTimeField(auto_now_add=True)

    class Meta:
        constraints = [
            models.UniqueConstraint(fields=['barrido', 'clave'], name='resultado_unico_por_barrido'),
        ]
        ordering = ['total_ops', 'mae']

    def __str__(self):
        return f"{self.barrido.name} - {self.clave} - {self.estado}"

    @property
    def cep(self) -> dict:
        return {q: getattr(self, f'cep{q}') for q in (50, 75, 90, 95, 99) if getattr(self, f'cep{q}') is not None}
