from majorsel.cli import main

main()
