from grnformer.cli import main

main()
