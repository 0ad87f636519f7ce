"""Reference figures the suite checks against.

The efficiency-score rows and the per-variant totals in REFERENCE_* are the
published operating points for these models.  FROZEN_TOTALS holds exact
layer-by-layer sums computed independently (direct arithmetic over the
architecture table, outside this package); they pin the package's own
accounting so regressions cannot hide inside the percentage tolerances.
"""

# (name, top-1 %, params in millions, mult-adds in billions, score)
NETSCORE_ROWS = [
    ("mobilenet-v1", 64.52, 3.26, 0.5675, 69.71),
    ("mobilenet-v2", 68.68, 2.29, 0.2997, 75.11),
    ("shufflenet-v2", 65.00, 1.32, 0.1401, 79.85),
    ("attonet-a", 73.00, 2.97, 0.4248, 73.53),
    ("attonet-b", 71.10, 1.87, 0.2775, 76.93),
    ("attonet-c", 69.60, 1.06, 0.1399, 81.99),
    ("attonet-d", 66.30, 0.32, 0.0575, 90.21),
]

# Published totals per variant (raw counts).
REFERENCE_PARAMS = {"A": 2.97e6, "B": 1.87e6, "C": 1.06e6, "D": 0.32e6}
REFERENCE_MULT_ADDS = {"A": 424.8e6, "B": 277.5e6, "C": 139.9e6, "D": 57.5e6}

# Exact totals at 3x224x224 under this toolkit's stated conventions
# (conv bias off, dense bias on, every conv layer counted, one
# multiply-accumulate per weight application).
FROZEN_TOTALS = {
    "A": (2_948_755, 578_441_416),
    "B": (1_852_619, 402_461_600),
    "C": (1_046_744, 222_784_307),
    "D": (318_709, 125_989_864),
}

# Spatial extent after each section at 224x224 input.
SHAPE_COLUMN = {
    "stem.conv": 112,
    "stem.pool": 56,
    "modules_1_3": 56,
    "modules_4_7": 28,
    "modules_8_13": 14,
    "modules_14_16": 7,
    "head.pool": 1,
}

# Conv layers per variant: stem + 4 main-path convs in each of 16 modules +
# 4 projection shortcuts; constant across the family.
CONV_LAYER_COUNT = 69
