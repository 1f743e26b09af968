import sys
import importlib
import json
import argparse
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Dict
from rich.console import Console
from rich.table import Table
from rich.panel import Panel
from rich.text import Text
from rich import box

# Add project root to Python path so we can import from src/
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

console = Console()

REQUIRED_PYTHON = (3, 9)

# import name -> distribution name
DEPENDENCIES = {
    'numpy': 'numpy',
    'scipy': 'scipy',
    'loguru': 'loguru',
    'pydantic': 'pydantic',
    'pydantic_settings': 'pydantic-settings',
    'dotenv': 'python-dotenv',
    'rich': 'rich',
}


def check_python_version() -> Tuple[bool, str]:
    """Python must be >= 3.9"""
    version = sys.version_info
    label = f"Python {version.major}.{version.minor}.{version.micro}"

    if version >= REQUIRED_PYTHON:
        return True, label
    return False, f"{label} (required: >= {REQUIRED_PYTHON[0]}.{REQUIRED_PYTHON[1]})"


def check_dependencies() -> Dict[str, Tuple[bool, str]]:
    """Import every runtime dependency and report its version"""
    results = {}

    for module_name, dist_name in DEPENDENCIES.items():
        try:
            module = importlib.import_module(module_name)
            version = getattr(module, '__version__', 'unknown')
            results[dist_name] = (True, f"v{version}")
        except ImportError:
            results[dist_name] = (False, "Not installed")

    return results


def check_directory_structure(create: bool = False) -> Dict[str, Tuple[bool, str]]:
    """Source tree plus the storage layout from Settings"""
    from src.config import Settings, setup_directories

    if create:
        setup_directories()

    settings = Settings()
    required_dirs = {
        'src': project_root / 'src',
        'tests': project_root / 'tests',
        'storage': settings.storage_dir,
        'storage/logs': settings.logs_dir,
        'storage/results': settings.results_dir,
    }

    results = {}
    for name, path in required_dirs.items():
        if path.is_dir():
            results[name] = (True, str(path))
        else:
            results[name] = (False, f"Missing: {path}")

    return results


def check_bundled_configs() -> Dict[str, Tuple[bool, str]]:
    """Every bundled experiment config must load and validate"""
    try:
        from src.harness import BUNDLED_CONFIGS_DIR, ConfigError, load_config
    except ImportError as e:
        return {'harness': (False, f"Import error: {e}")}

    results = {}
    for path in sorted(BUNDLED_CONFIGS_DIR.glob('*.cfg')):
        try:
            config = load_config(path)
            results[path.stem] = (True, f"{config.experiment.mode}, {len(config.seeds)} seed(s)")
        except ConfigError as e:
            results[path.stem] = (False, str(e))

    if not results:
        results['configs'] = (False, f"No .cfg files in {BUNDLED_CONFIGS_DIR}")

    return results


def check_solver() -> Tuple[bool, str]:
    """Q* of the chain MDP must match its closed form"""
    try:
        import numpy as np
        from src.envs import build_chain_mdp
        from src.mdp import solve_q_star
    except ImportError as e:
        return False, f"Import error: {e}"

    expected = np.array([[2.0, 5.0], [2.0, 4.0], [2.0, 3.0], [2.0, 0.0], [0.0, 0.0]])
    mdp = build_chain_mdp()
    q_star = solve_q_star(mdp)
    gap = float(np.max(np.abs(q_star[mdp.legal_mask] - expected[mdp.legal_mask])))

    if gap < 1e-9:
        return True, "Chain Q* matches"
    return False, f"Chain Q* off by {gap:.3g}"


def collect_checks(create_dirs: bool = False) -> Dict[str, List[Tuple[str, bool, str]]]:
    python_ok, python_details = check_python_version()
    solver_ok, solver_details = check_solver()

    return {
        "System": [
            ("Python", python_ok, python_details),
            ("Solver", solver_ok, solver_details),
        ],
        "Dependencies": [
            (dep, status, details) for dep, (status, details) in check_dependencies().items()
        ],
        "Directories": [
            (name, status, details) for name, (status, details) in check_directory_structure(create_dirs).items()
        ],
        "Configs": [
            (name, status, details) for name, (status, details) in check_bundled_configs().items()
        ],
    }


def create_status_table(checks: Dict[str, List[Tuple[str, bool, str]]]) -> Table:
    """Status table, one row per component"""
    table = Table(title="ReplayLab System Status", box=box.ROUNDED)

    table.add_column("Category", style="bold cyan", min_width=12)
    table.add_column("Component", style="bold", min_width=18)
    table.add_column("Status", justify="center", min_width=8)
    table.add_column("Details", min_width=25)

    for category, items in checks.items():
        for i, (component, status, details) in enumerate(items):
            status_icon = "[OK]" if status else "[ERROR]"
            status_color = "green" if status else "red"

            table.add_row(
                category if i == 0 else "",
                component,
                Text(status_icon, style=status_color),
                details
            )

    return table


def to_json(checks: Dict[str, List[Tuple[str, bool, str]]]) -> dict:
    components = [
        {"category": category, "name": name, "status": "ok" if status else "error", "message": details}
        for category, items in checks.items()
        for name, status, details in items
    ]
    overall = all(c["status"] == "ok" for c in components)
    return {"overall": "success" if overall else "error", "components": components}


def main(argv: Optional[Sequence[str]] = None) -> bool:
    """Run every check; True when all of them pass"""
    parser = argparse.ArgumentParser(description='ReplayLab System Check')
    parser.add_argument('--json', action='store_true', help='Print the results as JSON')
    parser.add_argument('--create-dirs', action='store_true', help='Create the storage directories first')
    args = parser.parse_args(argv)

    checks = collect_checks(create_dirs=args.create_dirs)
    total_checks = sum(len(items) for items in checks.values())
    passed_checks = sum(status for items in checks.values() for _, status, _ in items)

    if args.json:
        print(json.dumps(to_json(checks), indent=2))
        return passed_checks == total_checks

    console.print(Panel(
        "[bold blue]ReplayLab system check[/bold blue]\n"
        "Checking dependencies, storage and bundled experiments...",
        title="ReplayLab",
        border_style="blue"
    ))
    console.print(create_status_table(checks))
    console.print()

    if passed_checks == total_checks:
        console.print(Panel(
            f"[bold green][OK] All {total_checks} checks passed[/bold green]",
            title="Success",
            border_style="green"
        ))
    else:
        console.print(Panel(
            f"[bold red][ERROR] {total_checks - passed_checks} of {total_checks} checks failed[/bold red]\n"
            "See the rows marked in red above.",
            title="Problems Found",
            border_style="red"
        ))

    return passed_checks == total_checks


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
