"""Driver saliency prediction with attention over a convolutional LSTM and a braking decision head."""

__version__ = "0.1.0"
