"""
Small builders shared by several test modules.
"""

from rayforge.core.manifold import ChartDomain, MagneticSystem, MetricField, OneFormField


def make_system(metric=None, omega=None, domain=None) -> MagneticSystem:
    return MagneticSystem(domain or ChartDomain.unit_disk(),
                          metric or MetricField.euclidean(),
                          omega or OneFormField.zero())
