"""Instance generators: factored MDP value LPs and Walsh compressed sensing."""
