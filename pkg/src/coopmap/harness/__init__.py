from .config import ConfigError, ScenarioConfig, load_config
from .output import emit_plot_script, export_csv, parse_csv
from .simulate import RoundRecord, ScenarioResult, rmse, run_scenario
