"""Run every demo configuration in this directory and print each summary.

Usage: ``python demos/run_all.py [OUT_DIR] [NAME ...]``. Outputs land in
``OUT_DIR/<name>/`` (default ``demo-output``).
"""

import json
import sys
import time
from pathlib import Path

from prethermal.runner import load_config, run

HERE = Path(__file__).parent


def main(argv):
    out = Path(argv[0]) if argv else Path("demo-output")
    wanted = set(argv[1:])
    for path in sorted(HERE.glob("*.json")):
        if wanted and path.stem not in wanted:
            continue
        cfg = load_config(path)
        t0 = time.perf_counter()
        manifest = run(cfg["scenario"], cfg, out / path.stem)
        print(f"{path.stem:16s} {time.perf_counter() - t0:7.1f}s  {json.dumps(manifest['summary'])}", flush=True)


if __name__ == "__main__":
    main(sys.argv[1:])
