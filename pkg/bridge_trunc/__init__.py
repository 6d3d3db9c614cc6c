# Random truncations of random matrices
