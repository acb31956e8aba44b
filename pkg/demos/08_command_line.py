"""
The ndax command line
=====================

The same checks from a shell.  Exit status 0 means pass, 1 a failed
verdict, 2 a usage or input error and 3 an exhausted limit.
"""

import subprocess
import sys

from ndax import FIXTURES

F = lambda name: str(FIXTURES / name)  # noqa: E731
TIRE = ["--hl", F("tire_hl.ndt"), "--ll", F("tire_ll.ndt"), "--map", F("tire.ndm")]
TT = ["--hl", F("tt_plus_hl.ndt"), "--ll", F("tt_plus_ll.ndt"), "--map", F("tt_plus.ndm")]

commands = [
    ["check", *TIRE, "--all"],
    ["synth", "--theory", F("tire_hl.ndt"), "--goal", "At_HL(13)", "--mode", "weak"],
    ["monitor", *TT, "--trace", F("tt_plus_trace.json"), "--next"],
    ["simulate", "--theory", F("tire_hl.ndt"), "--strategy", F("strategies/f_h.json"), "--goal", "At_HL(13)", "--steps", "12", "--adversary", "prefer:DrvNoFlat"],
]
for cmd in commands:
    print("$ ndax", " ".join(c if not c.startswith("/") else c.rsplit("/", 1)[-1] for c in cmd))
    p = subprocess.run([sys.executable, "-m", "ndax", *cmd], capture_output=True, text=True)
    print(p.stdout.rstrip() or p.stderr.rstrip())
    print(f"[exit {p.returncode}]\n")
