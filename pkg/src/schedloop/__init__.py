"""FaaS DAG scheduling simulator with an LLM generate-and-verify policy search loop."""

__version__ = "0.1.0"
