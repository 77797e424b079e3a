"""Knowledge-graph construction toolkit: harvested JSON-LD records in,
a validated, queryable BFO-aligned quad store out.

The package is organized as small submodules with explicit imports;
see the README for the tour.  Nothing is re-exported here on purpose:
``kgforge.rdf`` is the data model, ``kgforge.mapping`` the rule engine,
``kgforge.pipeline`` the stages, ``kgforge.cli`` the command line.
"""
