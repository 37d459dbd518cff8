"""CLI scripts for analyzing tag reuse and evaluating tag predictors."""
