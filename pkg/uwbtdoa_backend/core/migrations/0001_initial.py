# Generated by Django 5.2.6 on 2026-10-18 10:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='barrido',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=120, unique=True)),
                ('config', models.JSONField(default=dict)),
                ('estado', models.CharField(choices=[('pendiente', 'pendiente'), ('en_curso', 'en_curso'), ('completado', 'completado'), ('fallido', 'fallido')], db_index=True, default='pendiente', max_length=20)),
                ('fecha_creacion', models.DateTimeField(auto_now_add=True)),
                ('fecha_actualizacion', models.DateTimeField(auto_now=True)),
            ],
        ),
        migrations.CreateModel(
            name='resultadoBarrido',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('clave', models.CharField(max_length=120)),
                ('patching', models.CharField(max_length=20)),
                ('ordering', models.CharField(max_length=20)),
                ('encoding', models.CharField(max_length=20)),
                ('l_patch', models.PositiveIntegerField()),
                ('d_model', models.PositiveIntegerField()),
                ('total_ops', models.BigIntegerField(default=0)),
                ('mae', models.FloatField(blank=True, null=True)),
                ('cep50', models.FloatField(blank=True, null=True)),
                ('cep75', models.FloatField(blank=True, null=True)),
                ('cep90', models.FloatField(blank=True, null=True)),
                ('cep95', models.FloatField(blank=True, null=True)),
                ('cep99', models.FloatField(blank=True, null=True)),
                ('n_eval', models.PositiveIntegerField(default=0)),
                ('estado', models.CharField(choices=[('ok', 'ok'), ('fallido', 'fallido')], db_index=True, default='ok', max_length=10)),
                ('error', models.TextField(blank=True, null=True)),
                ('duracion_s', models.FloatField(default=0.0)),
                ('fecha_creacion', models.DateTimeField(auto_now_add=True)),
                ('barrido', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='resultados', to='core.barrido')),
            ],
            options={
                'ordering': ['total_ops', 'mae'],
                'constraints': [models.UniqueConstraint(fields=('barrido', 'clave'), name='resultado_unico_por_barrido')],
            },
        ),
    ]
