#!/usr/bin/env python3
"""
Installation diagnostic script for the bone-length attack toolkit.
Checks dependencies, the default topology file and output permissions.
"""

import os
import platform
import sys
from pathlib import Path
from typing import List, Tuple

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))


def check_python_version() -> Tuple[bool, str]:
    """Check if Python version is compatible."""
    version = sys.version_info
    if version.major == 3 and version.minor >= 9:
        return True, f"✅ Python {version.major}.{version.minor}.{version.micro}"
    return (
        False,
        f"❌ Python {version.major}.{version.minor}.{version.micro} (requires 3.9+)",
    )


def check_dependencies() -> List[Tuple[bool, str]]:
    """Check if all required Python dependencies are installed."""
    dependencies = [
        ("numpy", "NumPy"),
        ("scipy", "SciPy"),
        ("pandas", "pandas"),
        ("dotenv", "Python-dotenv"),
        ("colorama", "colorama"),
    ]

    results = []
    for module, name in dependencies:
        try:
            mod = __import__(module)
            version = getattr(mod, "__version__", "Unknown")
            results.append((True, f"✅ {name} v{version}"))
        except ImportError:
            results.append((False, f"❌ {name} - Not installed"))

    return results


def check_topology() -> Tuple[bool, str]:
    """Check that the configured topology file loads."""
    from config import config
    from storage.service import storage_service
    from utils.error_handling import ApplicationError

    if not config.validate_config():
        return False, "❌ Configuration invalid (see warning above)"
    try:
        topo = storage_service.load_topology(config.TOPOLOGY_PATH)
    except ApplicationError as e:
        return False, f"❌ Topology {config.TOPOLOGY_PATH}: {e.message}"
    return True, f"✅ Topology '{topo.name}' ({topo.joint_count} joints, {len(topo.parts)} parts)"


def check_output_directory() -> Tuple[bool, str]:
    """Check that the output directory can be created and written."""
    from config import config

    try:
        path = config.get_output_path()
        marker = os.path.join(path, ".write_test")
        with open(marker, "w") as handle:
            handle.write("ok")
        os.remove(marker)
        return True, f"✅ Output directory writable ({path})"
    except OSError as e:
        return False, f"❌ Cannot write output directory: {e}"


def main():
    """Run all diagnostic checks."""
    print("🦴 Bone-length attack toolkit - Installation Diagnostic")
    print("=" * 60)

    print("\n💻 System Information:")
    print(f"   OS: {platform.system()} {platform.release()}")
    print(f"   Python: {sys.executable}")

    python_ok, python_msg = check_python_version()
    print(f"\n🐍 Python Version:\n   {python_msg}")

    print("\n📦 Python Dependencies:")
    dep_results = check_dependencies()
    for _, dep_msg in dep_results:
        print(f"   {dep_msg}")
    deps_ok = all(ok for ok, _ in dep_results)

    issues = []
    if not python_ok:
        issues.append("Python version")
    if not deps_ok:
        issues.append("Python dependencies")
    else:
        topo_ok, topo_msg = check_topology()
        out_ok, out_msg = check_output_directory()
        print(f"\n🗂️ Files:\n   {topo_msg}\n   {out_msg}")
        if not topo_ok:
            issues.append("Topology file")
        if not out_ok:
            issues.append("Output directory")

    print("\n" + "=" * 60)
    if not issues:
        print("🎉 All checks passed! Try: python main.py gen-data --out data/synthetic")
        return 0

    print(f"⚠️ Found {len(issues)} issue(s):")
    for issue in issues:
        print(f"   • {issue}")
    if "Python dependencies" in issues:
        print("\n🔧 Install missing dependencies: pip install -r requirements.txt")
    if "Topology file" in issues:
        print("\n🔧 Set BONEATTACK_TOPOLOGY_PATH or restore data/topologies/ntu25.json")
    return 1


if __name__ == "__main__":
    sys.exit(main())
