"""
Setup script for the robust aerial-RIS secrecy simulator
"""
import os
import shutil
import subprocess
import sys
from pathlib import Path


def install_requirements():
    """Install required packages"""
    print("📦 Installing required packages...")

    try:
        subprocess.check_call([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"])
        print("✅ All packages installed successfully!")
        return True
    except subprocess.CalledProcessError as e:
        print(f"❌ Error installing packages: {e}")
        return False


def create_directories():
    """Create the output folders used by the CLI"""
    print("📁 Creating directories...")

    for directory in ("results", "results/training", "checkpoints"):
        Path(directory).mkdir(parents=True, exist_ok=True)
        print(f"  ✓ Created {directory}/")

    print("✅ All directories created!")


def setup_environment():
    """Copy the settings template to .env"""
    print("🔧 Setting up environment...")

    if os.path.exists(".env"):
        print("  ✓ .env file already exists")
    elif os.path.exists(".env.example"):
        shutil.copy(".env.example", ".env")
        print("  ✓ Created .env file from template")
    else:
        print("  ⚠️  No .env.example found; built-in defaults will be used")


def check_solvers():
    """Make sure the simulator imports and a conic backend is available"""
    print("🧪 Checking modules and solvers...")

    try:
        import cvxpy
        import secure_aris  # noqa: F401
    except ImportError as e:
        print(f"  ❌ Import failed: {e}")
        return False

    installed = cvxpy.installed_solvers()
    found = [name for name in ("CLARABEL", "SCS") if name in installed]
    if not found:
        print(f"  ❌ Neither CLARABEL nor SCS is available (installed: {', '.join(installed)})")
        return False
    print(f"  ✓ Conic backends: {', '.join(found)}")
    print("✅ Simulator ready!")
    return True


def display_usage_instructions():
    """Display usage instructions"""
    print("\n" + "=" * 60)
    print("🎉 SETUP COMPLETE!")
    print("=" * 60)
    print()
    print("📋 NEXT STEPS:")
    print("1. Solve one placement:")
    print("   python -m secure_aris solve-inner --placement 161,89 --out results/inner.json")
    print()
    print("2. Stress the solution against the error balls:")
    print("   python -m secure_aris eval-worst-case --solution results/inner.json --out results/worst.json")
    print()
    print("3. Run an experiment:")
    print("   python -m secure_aris run-experiment --spec sweep-power")
    print()
    print("4. Run the tests:")
    print("   pytest              (fast suite)")
    print("   pytest -m slow      (acceptance runs, minutes to hours)")
    print()
    print("⚙️  Settings live in .env (see .env.example)")


def main():
    """Main setup function"""
    print("🚀 Setting up the robust aerial-RIS secrecy simulator...")
    print()

    create_directories()
    print()

    if not install_requirements():
        print("❌ Setup failed at package installation")
        return False
    print()

    setup_environment()
    print()

    if not check_solvers():
        print("❌ Setup failed at the solver check")
        return False

    display_usage_instructions()
    return True


if __name__ == "__main__" and len(sys.argv) > 1:
    # Invoked by a build backend (pip install); metadata lives in pyproject.toml
    from setuptools import setup
    setup()
elif __name__ == "__main__":
    success = main()
    if not success:
        sys.exit(1)
