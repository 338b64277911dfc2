import sys
from pathlib import Path

# Allow `import oracles` / `import synth` from test modules regardless of
# how pytest is invoked.
sys.path.insert(0, str(Path(__file__).resolve().parent))
