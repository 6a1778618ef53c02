"""ProjE knowledge-graph completion: training, evaluation and CLI."""
