#!/usr/bin/env python3
"""
Startup script for hyperbolic t-SNE
Checks dependencies, then embeds the bundled demo dataset (or forwards any
arguments to the command-line interface).
"""

import sys
from pathlib import Path

REQUIRED_MODULES = ['numpy', 'scipy', 'pandas', 'sklearn', 'numba', 'matplotlib', 'seaborn', 'dotenv']


def check_dependencies():
    """Print the dependency table; returns the missing module names"""
    print("📦 Checking dependencies...")
    missing = []
    for module in REQUIRED_MODULES:
        try:
            __import__(module)
            print(f"  ✓ {module}")
        except ImportError:
            missing.append(module)
            print(f"  ✗ {module} (missing)")
    return missing


def main():
    print("=" * 60)
    print("🎯 Hyperbolic t-SNE")
    print("=" * 60)
    print()

    if not Path('src').exists():
        print("❌ Error: src/ not found. Please run this script from the project root directory.")
        sys.exit(1)

    missing = check_dependencies()
    if missing:
        print()
        print("⚠️  Missing dependencies. Install all dependencies with:")
        print("   pip install -r requirements.txt")
        sys.exit(1)

    print()
    print("✅ All dependencies satisfied!")
    print()

    from src.cli_interface import main as cli_main

    argv = sys.argv[1:] or ["embed", "--svg"]
    sys.exit(cli_main(argv))


if __name__ == "__main__":
    main()
