"""Krylov-type complex Hessian operators and their continuity solver on flat tori."""
