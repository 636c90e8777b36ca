"""
Check if all required dependencies are installed.
"""

import sys

def check_module(name, package_name=None):
    """Check if a module is available."""
    if package_name is None:
        package_name = name

    try:
        __import__(name)
        print(f"✅ {package_name}")
        return True
    except ImportError:
        print(f"❌ {package_name} - Install with: pip3 install --user {package_name}")
        return False

def main():
    print("=" * 60)
    print("Checking randcons dependencies...")
    print("=" * 60)

    print("\n📦 Numerical Core:")
    core_ok = True
    core_ok &= check_module("numpy")
    core_ok &= check_module("scipy")
    core_ok &= check_module("networkx")

    print("\n📊 Reporting:")
    report_ok = True
    report_ok &= check_module("pandas")
    report_ok &= check_module("matplotlib")

    print("\n🧪 Testing Dependencies:")
    test_ok = True
    test_ok &= check_module("pytest")
    test_ok &= check_module("hypothesis")
    test_ok &= check_module("yaml", "PyYAML")

    print("\n📋 Schema Validation:")
    schema_ok = check_module("jsonschema")

    print("\n" + "=" * 60)

    ok = core_ok and report_ok and test_ok and schema_ok
    if ok:
        print("✅ All dependencies installed!")
        print("\nYou can now:")
        print("  - Print bounds: randcons bounds --epsilon 0.01 --delta 1e-10 --space 2 3")
        print("  - Run tests: alltests")
    else:
        print("⚠️  Some dependencies are missing.")
        print("\nQuick install:")
        print("  pip3 install --user -r requirements.txt")
        print("\nOr install individually:")
        if not core_ok:
            print("  pip3 install --user numpy scipy networkx")
        if not report_ok:
            print("  pip3 install --user pandas matplotlib")
        if not test_ok:
            print("  pip3 install --user pytest hypothesis PyYAML")
        if not schema_ok:
            print("  pip3 install --user jsonschema")

    print("=" * 60)

    return 0 if ok else 1

if __name__ == "__main__":
    sys.exit(main())
