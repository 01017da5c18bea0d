"""
Timestamped logging utility for all simulation stages
"""

from datetime import datetime

_quiet = False


def set_quiet(quiet: bool = True):
    """Silence everything except errors (CLI --quiet, long test runs)"""
    global _quiet
    _quiet = quiet


def log(message: str, category: str = "INFO"):
    """Print a timestamped log message"""
    if _quiet and category != "ERROR":
        return
    timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S.%f")[:-3]
    print(f"[{timestamp}] [{category}] {message}")


def log_config(message: str):
    """Log configuration loading and validation"""
    log(message, "CONFIG")


def log_sweep(message: str):
    """Log analyzer sweeps"""
    log(message, "SWEEP")


def log_fit(message: str):
    """Log correlation-curve fits"""
    log(message, "FIT")


def log_chsh(message: str):
    """Log CHSH extraction"""
    log(message, "CHSH")


def log_mc(message: str):
    """Log Monte Carlo ray tracing"""
    log(message, "MC")


def log_thermal(message: str):
    """Log thermal / heater events"""
    log(message, "THERMAL")


def log_mission(message: str):
    """Log mission scheduling"""
    log(message, "MISSION")


def log_warning(message: str):
    """Log a recoverable problem"""
    log(f"⚠️  {message}", "WARNING")


def log_error(message: str):
    """Log errors"""
    log(f"❌ {message}", "ERROR")


def log_success(message: str):
    """Log success"""
    log(f"✅ {message}", "SUCCESS")
