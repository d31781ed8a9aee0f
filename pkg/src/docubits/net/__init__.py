"""Wire protocol, authoritative server, reference client, sim harness."""
