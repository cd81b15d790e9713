"""contact-hj: Hamilton-Jacobi theory for contact Hamiltonian systems."""
