"""Sleep, logging start/end wall times: sleeper.py <log> <seconds> <instance>."""
import os
import sys
import time

log, seconds, instance = sys.argv[1], float(sys.argv[2]), sys.argv[3]
with open(log, "a") as fh:
    fh.write(f"start {time.time():.6f} {os.getpid()}\n")
time.sleep(seconds)
with open(log, "a") as fh:
    fh.write(f"end {time.time():.6f} {os.getpid()}\n")
print("UNKNOWN")
