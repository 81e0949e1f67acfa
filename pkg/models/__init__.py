"""
spatialcc データモデルパッケージ
"""
from .system_config import SystemConfig, EulerInversionParams
from .network_geometry import NetworkGeometry
from .content import Library, CacheAssignment, MulticastCodeword, MdsBlockSet
from .estimates import StreamRateEstimate, OutageEstimate, SicOrderReport
from .curve_table import CurvePoint, CurveTable
from .planner_result import PlannerRecord, PlannerResult
from .experiment import ExperimentSpec

__all__ = [
    'SystemConfig', 'EulerInversionParams', 'NetworkGeometry',
    'Library', 'CacheAssignment', 'MulticastCodeword', 'MdsBlockSet',
    'StreamRateEstimate', 'OutageEstimate', 'SicOrderReport',
    'CurvePoint', 'CurveTable', 'PlannerRecord', 'PlannerResult', 'ExperimentSpec',
]
__version__ = '1.0.0'
