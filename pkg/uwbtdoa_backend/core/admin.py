from django.contrib import admin
from .models import barrido, resultadoBarrido

# Register your models here.
admin.site.register(barrido)

@admin.register(resultadoBarrido)
class ResultadoBarridoAdmin(admin.ModelAdmin):
    list_display = ('id', 'barrido', 'clave', 'total_ops', 'mae', 'estado', 'fecha_creacion')
    list_filter = ('estado', 'patching', 'ordering', 'encoding')
    search_fields = ('clave', 'barrido__name')
