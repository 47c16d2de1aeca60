"""Dormand-Prince 5(4) tableau shared by both integrator backends.

The stepper advances y' = G(t) y where G(t) = G_static + sum_k amp_k
exp(i freq_k t) G_k; every physical prefactor (including the -i of a
Schroedinger-type generator) is folded into the packed matrices upstream.
"""

C2 = 1.0 / 5.0
C3 = 3.0 / 10.0
C4 = 4.0 / 5.0
C5 = 8.0 / 9.0

A21 = 1.0 / 5.0
A31 = 3.0 / 40.0
A32 = 9.0 / 40.0
A41 = 44.0 / 45.0
A42 = -56.0 / 15.0
A43 = 32.0 / 9.0
A51 = 19372.0 / 6561.0
A52 = -25360.0 / 2187.0
A53 = 64448.0 / 6561.0
A54 = -212.0 / 729.0
A61 = 9017.0 / 3168.0
A62 = -355.0 / 33.0
A63 = 46732.0 / 5247.0
A64 = 49.0 / 176.0
A65 = -5103.0 / 18656.0
A71 = 35.0 / 384.0
A73 = 500.0 / 1113.0
A74 = 125.0 / 192.0
A75 = -2187.0 / 6784.0
A76 = 11.0 / 84.0

# 5th-order minus embedded 4th-order weights (error estimator).
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
ORDER_EXPONENT = 0.2  # 1 / (order of the embedded pair)

# Segment outcome codes.
STATUS_REACHED = 0
STATUS_JUMP = 1
STATUS_UNDERFLOW = 2

JUMP_TIME_RTOL = 1e-10
MAX_STEPS_PER_SEGMENT = 100_000_000
