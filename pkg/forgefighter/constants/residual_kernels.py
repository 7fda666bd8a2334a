"""
Fixed high-pass kernels for the residual stream.

All kernels are applied by correlation with replicate padding.
"""

import numpy as np

LAPLACIAN_3X3 = np.array(
    [
        [0.0, 1.0, 0.0],
        [1.0, -4.0, 1.0],
        [0.0, 1.0, 0.0],
    ]
)

FIRST_ORDER_HORIZONTAL = np.array([[-1.0, 1.0]])

FIRST_ORDER_VERTICAL = np.array([[-1.0], [1.0]])

# SRM-style 5x5 second-order kernel, center +12, normalized by 12
SECOND_ORDER_KB_5X5 = (
    np.array(
        [
            [1.0, -2.0, 2.0, -2.0, 1.0],
            [-2.0, 6.0, -8.0, 6.0, -2.0],
            [2.0, -8.0, 12.0, -8.0, 2.0],
            [-2.0, 6.0, -8.0, 6.0, -2.0],
            [1.0, -2.0, 2.0, -2.0, 1.0],
        ]
    )
    / 12.0
)

RESIDUAL_KERNELS = (
    ("laplacian", LAPLACIAN_3X3),
    ("first_order_h", FIRST_ORDER_HORIZONTAL),
    ("first_order_v", FIRST_ORDER_VERTICAL),
    ("second_order_kb", SECOND_ORDER_KB_5X5),
)

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
