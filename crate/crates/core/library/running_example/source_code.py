# Key exchange over an untrusted channel.
#
# Public parameters are broadcast first, then a private key is drawn
# and the public key x = g**k is computed by square-and-multiply over
# the bits of k before being broadcast.
#
# genPublic, genPrivate and broadcast are provided by the transport
# layer.
#
def runningExample(keySize):
    p, g = genPublic()
    broadcast([p, g])
    k = genPrivate(keySize)
    # x = g**k
    x = 1
    for i in range(keySize - 1, -1, -1):
        x = x**2
        if (k & (1 << i)) == 1:
            x = g*x
        else:
            y = g*x

    # The branch above depends on k, so x
    # carries information about the private
    # key from here on.
    #
    #
    #
    broadcast([x])
