"""Fast-mixing Markov chains for ergodic region sequencing and point-cloud anomaly detection."""

__version__ = "0.1.0"
