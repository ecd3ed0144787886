"""Launch the live streaming session with the browser viewer.

Builds the viewer bundle if needed, then serves the pull scenario. Open the
printed http:// URL, drag on the floor plane to move the gripper, shift-drag
for height, Q/E to rotate, and space to close the jaws and grasp.
"""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DIST = ROOT / "frontend" / "dist"

if not (DIST / "index.html").exists():
    print("building the viewer bundle first (npm install && npm run build)...")
    subprocess.run(["npm", "install"], cwd=ROOT / "frontend", check=True)
    subprocess.run(["npm", "run", "build"], cwd=ROOT / "frontend", check=True)

from softmpm.cli import main  # noqa: E402  (import after the build check)

sys.exit(main([
    "serve", "--scenario", "pull", "--particles", "4000",
    "--bind", "127.0.0.1:8765", "--static", str(DIST),
]))
