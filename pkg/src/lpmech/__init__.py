"""Numerical mechanics on bundles TQ + V with a Lie-algebra fiber.

Modules:
    smoothmap    smooth maps with exact forward-mode derivatives
    lpbundle     bundle charts, derived operators, closure-condition checks
    liegroups    matrix groups (rotations, nilpotent, translations)
    dynamics     constrained variational dynamics, integration, currents
    hamiltonian  dual-side bracket, flows and the Legendre correspondence
    reduction    trivialized principal-bundle reduction, staged reduction
    systems      ready-made example systems
    cli          command-line front end
"""

__version__ = "0.1.0"
