from pathlib import Path

import markdown

HTML_TEMPLATE = """<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>{title}</title>
<style>
body {{ font-family: sans-serif; max-width: 60em; margin: 2em auto; }}
table {{ border-collapse: collapse; margin: 1em 0; }}
th, td {{ border: 1px solid #999; padding: 0.25em 0.6em; text-align: right; }}
th:first-child, td:first-child {{ text-align: left; }}
</style>
</head>
<body>
{body}
</body>
</html>
"""


def convert_md_to_html(md_file_path: Path, title: str = "evidential_nav report") -> Path:
    """Convert a markdown file to a standalone HTML file next to it."""
    md_file_path = Path(md_file_path)
    html_file_path = md_file_path.with_suffix(".html")
    body = markdown.markdown(md_file_path.read_text(), extensions=["tables"])
    html_file_path.write_text(HTML_TEMPLATE.format(title=title, body=body))
    return html_file_path


if __name__ == "__main__":
    import sys

    html = convert_md_to_html(Path(sys.argv[1]))
    print(f"HTML file saved to {html}")
