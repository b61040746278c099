"""Runs the CLI on the example configs and checks every SVG is strict XML."""
import json
import pathlib
import subprocess
import sys
import tempfile
import xml.etree.ElementTree as ET

SVG = "{http://www.w3.org/2000/svg}"


def main():
    cli, data, fixtures = sys.argv[1:4]
    runs = [
        ("reconcile", pathlib.Path(data, "grand_est", "silvaflux.toml")),
        ("report", pathlib.Path(data, "grand_est", "silvaflux.toml")),
        ("scenario", pathlib.Path(data, "grand_est", "scenario_crushing.cfg.toml")),
        ("scenario", pathlib.Path(data, "grand_est", "scenario_chemistry.cfg.toml")),
        ("reconcile", pathlib.Path(fixtures, "single_flow", "silvaflux.toml")),
    ]
    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        for i, (command, config) in enumerate(runs):
            out = pathlib.Path(tmp, str(i))
            subprocess.run([cli, command, "--config", str(config), "--out", str(out)],
                           check=True, stdout=subprocess.DEVNULL)
            for svg in sorted(out.glob("*.svg")):
                try:
                    root = ET.parse(svg).getroot()
                    assert root.tag == SVG + "svg", root.tag
                    paths = root.findall(f".//{SVG}path")
                    assert paths, "no ribbons"
                    for p in paths:
                        assert float(p.get("stroke-width")) > 0
                    doc = json.loads(svg.with_suffix(".sankey.json").read_text())
                    assert len(doc["links"]) == len(paths), "ribbon count differs from interchange links"
                    print(f"ok {config.name} {svg.name} ({len(paths)} ribbons)")
                except Exception as e:  # noqa: BLE001
                    failures += 1
                    print(f"FAIL {config.name} {svg.name}: {e}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
