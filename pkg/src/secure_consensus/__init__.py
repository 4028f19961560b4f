"""Privacy-preserving average consensus."""
