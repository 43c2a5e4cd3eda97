import os
from pathlib import Path

from crewai.flow import Flow, and_, listen, start

from evidential_nav.stages import bench_nav, collect, eval_learning, gen_maps, report, train
from evidential_nav.utils.config_manager import configure_logging, load_experiment_config, resolve_output_dir
from evidential_nav.utils.constants import GREEN, MAP_SUMMARY_FILE, RESET, TRAINING_CURVES_FILE
from evidential_nav.utils.models import PipelineState


class PipelineFlow(Flow[PipelineState]):

    def _config(self):
        cfg = load_experiment_config(self.state.config_path or None, self.state.overrides)
        return cfg.model_copy(update={"seed": self.state.seed})

    @start()
    def generate_maps(self):
        print("🗺️  Generating terrain maps")
        self.state.output_dir = str(resolve_output_dir(self.state.output_dir or None))
        paths = gen_maps.run(self._config(), self.state.output_dir)
        self.state.map_files = [str(p) for p in paths]
        self.state.map_summary = str(Path(self.state.output_dir) / MAP_SUMMARY_FILE)

    @listen(generate_maps)
    def collect_data(self):
        print("🚙 Collecting driving episodes")
        self.state.dataset = str(collect.run(self._config(), self.state.output_dir))

    @listen(collect_data)
    def train_networks(self):
        print("🧠 Training traversability networks")
        self.state.checkpoints = [str(p) for p in train.run(self._config(), self.state.output_dir)]
        self.state.training_curves = str(Path(self.state.output_dir) / TRAINING_CURVES_FILE)

    # Both benchmarks only read the checkpoints, so they run side by side
    @listen(train_networks)
    def evaluate_learning(self):
        print("📏 Evaluating prediction error (parallel)")
        self.state.learning_results = str(eval_learning.run(self._config(), self.state.output_dir))

    @listen(train_networks)
    def benchmark_navigation(self):
        print("🧭 Running navigation trials (parallel)")
        self.state.nav_summary = str(bench_nav.run(self._config(), self.state.output_dir))

    @listen(and_(evaluate_learning, benchmark_navigation))
    def write_report(self):
        print("📝 Writing report")
        md_path, html_path = report.run(self.state.output_dir)
        self.state.report_markdown = str(md_path)
        self.state.report_html = str(html_path)
        print(f"{GREEN}Report saved to {md_path} and {html_path}{RESET}")


def kickoff():
    configure_logging()
    pipeline_flow = PipelineFlow()
    pipeline_flow.kickoff(inputs={
        "config_path": os.getenv("EVIDENTIAL_NAV_CONFIG", ""),
        "output_dir": os.getenv("EVIDENTIAL_NAV_OUTPUT_DIR", ""),
        "seed": load_experiment_config().seed,
    })


def plot():
    pipeline_flow = PipelineFlow()
    pipeline_flow.plot()


if __name__ == "__main__":
    kickoff()
