"""Regenerate docs/openapi.json from the live app definition."""

import json
import tempfile
from pathlib import Path

from conflictkit.service import ServiceConfig, create_app

app = create_app(ServiceConfig(data_dir=Path(tempfile.mkdtemp())), detector=None)
out = Path(__file__).parent / "openapi.json"
out.write_text(json.dumps(app.openapi(), indent=2) + "\n", encoding="utf-8")
print(f"wrote {out}")
