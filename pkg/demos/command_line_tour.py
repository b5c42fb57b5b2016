"""A short tour of the ``mimocap`` command line, driven from Python.

Each call is equivalent to running ``mimocap ...`` in a shell.  The
correlation-file example writes a CORRMAT file first so the tour is
self-contained.
"""

import tempfile
from pathlib import Path

from mimocap import ChannelConfig, exponential_pair
from mimocap.channel import write_correlation_file
from mimocap.cli import main


def run(*argv):
    print(f"\n$ mimocap {' '.join(argv)}")
    code = main(list(argv))
    if code:
        print(f"(exit code {code})")


run("stats", "--nt", "2", "--nr", "2", "--snr-db", "15", "--iid")
run("stats", "--nt", "2", "--nr", "2", "--snr-db", "40", "--exp", "0.9", "0.9", "--high-snr")
run("dist", "--nt", "3", "--nr", "3", "--exp", "0.5", "0.7", "--outage", "0.1", "--outage", "0.01")
run("sweep", "--axis", "antennas", "--range", "2:4:3", "--iid", "--bits")
run("dist", "--outage", "0")          # rejected: the level must lie strictly inside (0, 1)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "pair.corr"
    pair = exponential_pair(ChannelConfig(3, 2, 0.0), 0.4, 0.8)
    write_correlation_file(path, pair.psi_t, pair.psi_r, comment="exponential 0.4 / 0.8")
    run("validate-corr", str(path))
    run("stats", "--corr-file", str(path), "--snr-db", "10", "--json")
