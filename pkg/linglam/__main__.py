import sys

print(
    "Error: 'linglam' package is not directly runnable. Did you mean 'linglam.cli.runner'?",
    file=sys.stderr,
)
sys.exit(1)
