"""
Counter-forensic attacks for the ForgeFighter system.

This module provides one attack class per family.
"""

from .gamma_attack import GammaAttack, apply_gamma
from .jpeg_attack import JpegAttack, apply_jpeg, realign_recompress
from .regrain_attack import RegrainAttack, apply_regrain
from .seam_attack import SeamAttack, apply_seam, seam_band
from .transcode_attack import TranscodeAttack, apply_transcode
from .warp_attack import WarpAttack, apply_warp
