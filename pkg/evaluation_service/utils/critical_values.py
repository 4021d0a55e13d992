# evaluation_service/utils/critical_values.py
"""
5% critical values of the fluctuation test, keyed by mu = window / sample size.

Transcribed from the published table of the rolling-window relative
performance test (Giacomini and Rossi, 2010, Table 1). Between grid points
values are interpolated linearly; outside [0.1, 0.9] the end values apply.
"""
import numpy as np

MU_GRID = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])

ONE_SIDED_05 = np.array([3.176, 2.938, 2.770, 2.624, 2.475, 2.352, 2.248, 2.080, 1.975])
TWO_SIDED_05 = np.array([3.393, 3.179, 3.012, 2.890, 2.779, 2.634, 2.560, 2.433, 2.248])


def fluctuation_critical_value(mu: float, two_sided: bool = False) -> float:
    table = TWO_SIDED_05 if two_sided else ONE_SIDED_05
    return float(np.interp(mu, MU_GRID, table))
