"""Wave-packet parametrix and Wiener amalgam norms for Dirac equations with potentials."""
