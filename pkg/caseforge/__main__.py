from caseforge.main import main

main()
