from pydantic import BaseModel, Field


class PipelineState(BaseModel):
    # Run inputs
    config_path: str = ""
    output_dir: str = ""
    seed: int = 0
    overrides: list[str] = Field(default_factory=list)

    # Stage outputs
    map_files: list[str] = Field(default_factory=list)
    map_summary: str = ""
    dataset: str = ""
    checkpoints: list[str] = Field(default_factory=list)
    training_curves: str = ""
    learning_results: str = ""
    nav_summary: str = ""
    report_markdown: str = ""
    report_html: str = ""
