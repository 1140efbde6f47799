"""Network fault localisation by simulation: a discrete-time packet network
simulator, monitor placement heuristics, MCMC inference of anomalous nodes
and the evaluation tools that compare placements."""

__version__ = "0.1.0"
