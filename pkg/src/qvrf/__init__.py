"""Variable-rate image coding with a single quantization regulator."""

from .codec import (Bitstream, BitBreakdown, RDPoint, account_bits, analyze, decode_image,
                    encode_image, rd_sweep)
from .entropy_model import (A_MAX, A_MIN, SIGMA_MIN, GaussianParams, build_symbol_table,
                            dequantize, pmf_direct, pmf_reparam, quantize)
from .metrics import RDCurve, bd_rate, ms_ssim, psnr
from .rate_control import (LAMBDAS, Calibration, fit_sqrt_lambda_line, init_regulators,
                           lambda_to_regulator, optimize_regulator, optimize_vector)

__version__ = "0.1.0"
