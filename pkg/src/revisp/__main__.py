from revisp.cli import entry

entry()
