"""How fast the capacity statistics approach their high-SNR limits.

For a square array the limiting variance, skewness and kurtosis do not
depend on correlation at all.  The exact statistics get there slowly,
and more slowly still when correlation is strong, because the smallest
channel eigenvalue keeps a finite density at zero.
"""

import math

from mimocap import ChannelConfig, cumulants_for, cumulants_high_snr, exponential_pair, iid_pair

limit = cumulants_high_snr(ChannelConfig(2, 2, 0.0))
print(f"limit: variance {limit.variance:.4f} (pi^2/3 - 1 = {math.pi ** 2 / 3 - 1:.4f}), "
      f"skewness {limit.skewness:.4f}, excess kurtosis {limit.kurtosis_excess:.4f}\n")

print(f"{'snr_db':>6} {'case':>14} {'variance':>9} {'skewness':>9} {'kurtosis':>9}")
for snr in (10, 20, 30, 40, 50, 60, 70):
    cfg = ChannelConfig(2, 2, float(snr))
    for label, pair in (("iid", iid_pair(cfg)), ("exp(0.5, 0.7)", exponential_pair(cfg, 0.5, 0.7))):
        cs = cumulants_for(cfg, pair)
        print(f"{snr:>6} {label:>14} {cs.variance:9.4f} {cs.skewness:9.4f} {cs.kurtosis_excess:9.4f}")

# With more receive than transmit antennas the smallest eigenvalue is pushed
# away from zero and correlation on the small side stops mattering much sooner.
cfg = ChannelConfig(2, 4, 50.0)
for rho in (0.1, 0.5, 0.9):
    cs = cumulants_for(cfg, exponential_pair(cfg, rho, 0.6))
    print(f"2x4 at 50 dB, rho_t = {rho}: variance {cs.variance:.6f}, kurtosis {cs.kurtosis_excess:.6f}")
