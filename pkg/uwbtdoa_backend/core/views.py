from django.shortcuts import get_object_or_404
from rest_framework import viewsets, status
from rest_framework.response import Response
from rest_framework.decorators import api_view, permission_classes, action
from rest_framework.permissions import AllowAny
from .models import barrido, resultadoBarrido
from .serializer import barridoSerializer, resultadoBarridoSerializer, ComplejidadQuerySerializer
from .analysis.complejidad import cnn_baseline_ops, op_count, pareto_front
from .exceptions import UwbTdoaError
from .utils.config import model_config_from

# Create your views here.

class barridoViewSet(viewsets.ReadOnlyModelViewSet):
    serializer_class = barridoSerializer
    permission_classes = [AllowAny]
    queryset = barrido.objects.all().order_by('-fecha_creacion')

    @action(detail=True, methods=['get'], url_path='pareto')
    def pareto(self, request, pk=None):
        registro = self.get_object()
        #Solo las configuraciones que terminaron bien entran al frente
        ok = registro.resultados.filter(estado='ok', mae__isnull=False)
        frente = pareto_front(list(ok))
        return Response(resultadoBarridoSerializer(frente, many=True).data)


class resultadoBarridoViewSet(viewsets.ReadOnlyModelViewSet):
    serializer_class = resultadoBarridoSerializer
    permission_classes = [AllowAny]

    def get_queryset(self):
        qs = resultadoBarrido.objects.select_related('barrido')
        nombre = self.request.query_params.get('barrido')
        if nombre:
            get_object_or_404(barrido, name=nombre)
            qs = qs.filter(barrido__name=nombre)
        estado = self.request.query_params.get('estado')
        if estado:
            qs = qs.filter(estado=estado)
        return qs


@api_view(['GET'])
@permission_classes([AllowAny])
def complejidad(request):
    ser = ComplejidadQuerySerializer(data=request.query_params.dict())
    ser.is_valid(raise_exception=True)
    datos = ser.validated_data
    try:
        cfg = model_config_from(datos)
        conteo = op_count(cfg, datos['n_total'], datos['n_av'])
    except UwbTdoaError as e:
        return Response({'error': str(e)}, status=status.HTTP_400_BAD_REQUEST)
    return Response({'config': cfg.to_dict(), **conteo.to_dict()})


@api_view(['GET'])
@permission_classes([AllowAny])
def complejidad_cnn(request):
    try:
        pares = int(request.query_params.get('pares', 15))
        return Response({'pares': pares, 'total_ops': cnn_baseline_ops(pares)})
    except (ValueError, UwbTdoaError) as e:
        return Response({'error': str(e)}, status=status.HTTP_400_BAD_REQUEST)
