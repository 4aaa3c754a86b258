"""SAT-based verification of binarized neural networks with inter-neuron factoring."""
