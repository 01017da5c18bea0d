"""Utility modules"""
from utils.logger import log, log_config, log_sweep, log_fit, log_chsh, log_mc, log_thermal, log_mission, log_warning, log_error, log_success, set_quiet
