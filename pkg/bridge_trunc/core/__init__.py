# Numerical core: ensembles, processes, limits, Monte-Carlo engine
