#!/usr/bin/env python3
"""
Validation script to check dependencies, imports and one end-to-end query
"""

import sys
import os

# Add src to path
ROOT = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(ROOT, 'src'))


def check_dependencies():
    """Check that all dependencies are available."""
    print("Checking dependencies...")

    dependencies = [
        ('numpy', 'numpy'),
        ('yaml', 'pyyaml'),
        ('colorlog', 'colorlog'),
        ('dotenv', 'python-dotenv'),
    ]

    all_ok = True
    for module_name, package_name in dependencies:
        try:
            __import__(module_name)
            print(f"✓ {package_name} available")
        except ImportError:
            print(f"✗ {package_name} not found - install with: pip install {package_name}")
            all_ok = False

    return all_ok


def check_imports():
    """Check that all modules can be imported."""
    print("\nChecking module imports...")

    try:
        from core.prov_model import ProvGraph
        print("✓ prov_model imported successfully")

        from core.d4m_codec import encode_graph
        print("✓ d4m_codec imported successfully")

        from core.kv_store import open_store
        print("✓ kv_store imported successfully")

        from core.ingest_pipeline import IngestPipeline
        print("✓ ingest_pipeline imported successfully")

        from core.curator_service import CuratorService
        print("✓ curator_service imported successfully")

        from core.analytics import bfs
        print("✓ analytics imported successfully")

        from core.bench import bench_ingest
        print("✓ bench imported successfully")

        from utils.config import Config
        from utils.logger import setup_logger
        print("✓ utils imported successfully")

        print("\n✓ All imports successful!")
        return True

    except ImportError as e:
        print(f"\n✗ Import error: {e}")
        return False


def check_config():
    """Check configuration loading."""
    print("\nChecking configuration...")

    try:
        from utils.config import Config
        config = Config(os.path.join(ROOT, 'config', 'default_config.yaml'), use_env=False)

        assert config.get('pipeline.batch_size') == 1024
        assert config.get('query.depth') == 3

        print("✓ Configuration system working")
        return True

    except Exception as e:
        print(f"✗ Configuration error: {e}")
        return False


def check_example_query():
    """Load the example graph batch and run the depth-3 query from EN6, EN7."""
    print("\nChecking the example graph...")

    try:
        from core.analytics import TraversalQuery, bfs
        from core.ingest_pipeline import discover_batches, ingest_batch
        from core.kv_store import open_store

        store = open_store(None)
        for descriptor in discover_batches(os.path.join(ROOT, 'fixtures', 'example_graph')):
            ingest_batch(store, descriptor)
        result = bfs(store, TraversalQuery(frozenset({'EN6', 'EN7'}), 3))

        assert result.levels == 3
        assert {row.in_node for row in result.rows if row.depth == 3} == {'AC0', 'EN3', 'EN4'}

        print(f"✓ Query returned {len(result.rows)} rows in {result.scans_performed} scans")
        return True

    except Exception as e:
        print(f"✗ Example query failed: {e}")
        return False


def main():
    """Run all checks."""
    print("=" * 50)
    print("Provenance Graph Store - Validation")
    print("=" * 50)
    print()

    results = []

    results.append(("Dependencies", check_dependencies()))
    results.append(("Imports", check_imports()))
    results.append(("Configuration", check_config()))
    results.append(("Example query", check_example_query()))

    # Summary
    print("\n" + "=" * 50)
    print("VALIDATION SUMMARY")
    print("=" * 50)

    for check_name, passed in results:
        status = "PASS" if passed else "FAIL"
        symbol = "✓" if passed else "✗"
        print(f"{symbol} {check_name}: {status}")

    all_passed = all(passed for _, passed in results)

    print()
    if all_passed:
        print("✓ All validations passed!")
        print("\nYou can now run the application:")
        print("  python src/main.py --help")
        return 0
    else:
        print("✗ Some validations failed")
        print("\nPlease install missing dependencies:")
        print("  pip install -r requirements.txt")
        return 1


if __name__ == "__main__":
    sys.exit(main())
