from rydpol.main import main

main()
