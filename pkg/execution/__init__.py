"""Library modules and command-line tools of the JIT transpilation toolkit."""
